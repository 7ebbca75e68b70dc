#pragma once

#include "ventfit/loss.hpp"

#include <fstream>
#include <string>
#include <vector>

namespace ventfit {

// Outcome of one subject fit. On a clean run `mesh` holds the final vertex
// positions after total_iters steps; on an abort it holds the positions of
// the last finite evaluation (matching the last trace entry).
struct FitResult {
    LabeledMesh mesh;
    std::vector<LossBreakdown> trace;
    bool aborted = false;
    std::string abort_reason;
};

// Gradient descent of all vertices at once: every vertex, including the
// shared ring, carries its own displacement. The target must already be in
// template space (see prepare_target). Deterministic for identical inputs.
inline FitResult fit_subject(const LabeledMesh& template_mesh, const LabeledPointCloud& target,
                             const FitConfig& config) {
    LossEvaluator evaluator(template_mesh, target, config);
    FitResult out;
    out.mesh = template_mesh;
    out.trace.reserve(static_cast<std::size_t>(config.total_iters));

    std::vector<Vec3> x = template_mesh.vertices;
    std::vector<Vec3> last_good = x;
    std::vector<Vec3> grad;
    AdamWState state(x.size());

    for (int it = 0; it < config.total_iters; ++it) {
        LossBreakdown step;
        try {
            step = evaluator.evaluate(x, &grad);
        } catch (const numerical_error& e) {
            out.aborted = true;
            out.abort_reason =
                "iteration " + std::to_string(it) + ": " + e.what();
            break;
        } catch (const geometry_error& e) {
            out.aborted = true;
            out.abort_reason =
                "iteration " + std::to_string(it) + ": mesh degenerated (" + e.what() + ")";
            break;
        }
        last_good = x;
        out.trace.push_back(step);
        adamw_step(x, grad, state, lr_schedule(it, config), config);
    }

    out.mesh.vertices = out.aborted ? last_good : x;
    return out;
}

// Per-iteration loss components and learning rate as CSV.
inline void write_trace_csv(const std::string& path, const std::vector<LossBreakdown>& trace,
                            const FitConfig& config) {
    std::ofstream f(path);
    if (!f) throw input_error("cannot write trace file: " + path);
    f << "iter,lr,total";
    for (const char* term : {"lv", "hip", "wm", "thal", "caud", "opp"})
        f << ',' << term << "_cf," << term << "_pm," << term << "_mp";
    f << ",d_vert,d_norm,edge,cons,lap\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const LossBreakdown& b = trace[i];
        f << i << ',' << fmt_double(lr_schedule(static_cast<int>(i), config)) << ','
          << fmt_double(b.total);
        for (const DistanceTerm* t :
             {&b.lv, &b.hip, &b.peri[0], &b.peri[1], &b.peri[2], &b.peri[3]})
            f << ',' << fmt_double(t->cf) << ',' << fmt_double(t->pm) << ','
              << fmt_double(t->mp);
        f << ',' << fmt_double(b.d_vert) << ',' << fmt_double(b.d_norm) << ','
          << fmt_double(b.edge) << ',' << fmt_double(b.cons) << ',' << fmt_double(b.lap)
          << '\n';
    }
    if (!f) throw input_error("failed while writing trace file: " + path);
}

}  // namespace ventfit
