#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <torch/torch.h>
#include <vector>

// Finite-difference oracle for autograd gradients, in float64.
//
// Two independent probes per check:
//   * directional: random unit-scale directions over every leaf at once,
//     comparing <grad, d> with the derivative of f along d;
//   * coordinate: individual entries drawn from those whose analytic
//     gradient is not negligible against the largest one, so that the
//     finite difference is not swamped by round-off.
// Derivatives use the fourth-order central stencil.
namespace turbrec::testing {

struct GradCheckOptions {
    int directions = 4;
    int coordinates = 8;
    double step = 1e-5;
    std::uint64_t seed = 7;
    double coordinate_floor = 1e-3;  // relative to max |grad|
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    int checks = 0;
    std::string where;

    std::string describe() const {
        std::ostringstream os;
        os << "max rel err " << max_rel_error << " over " << checks << " probes (worst " << where
           << ": analytic " << worst_analytic << ", numeric " << worst_numeric << ")";
        return os.str();
    }
};

inline double relative_error(double a, double n) {
    const double scale = std::max(std::abs(a), std::abs(n));
    return scale == 0.0 ? 0.0 : std::abs(a - n) / scale;
}

/// Fixed random projection turning a tensor output into a scalar objective.
inline torch::Tensor project(const torch::Tensor& out, std::uint64_t seed = 11) {
    auto gen = torch::make_generator<torch::CPUGeneratorImpl>(seed);
    const auto w = torch::randn(out.sizes(), gen, torch::TensorOptions().dtype(out.scalar_type()));
    return (out * w).sum();
}

/// f must be a deterministic scalar function of the leaves (float64 tensors
/// with requires_grad set).
inline GradCheckResult gradcheck(const std::function<torch::Tensor()>& f, const std::vector<torch::Tensor>& leaves,
                                 const GradCheckOptions& options = {}) {
    for (const auto& l : leaves) TORCH_CHECK(l.scalar_type() == torch::kFloat64, "gradcheck needs float64 leaves");
    const auto y = f();
    TORCH_CHECK(y.numel() == 1, "gradcheck needs a scalar objective");
    auto grads = torch::autograd::grad({y}, leaves, {}, false, false, true);
    for (std::size_t i = 0; i < grads.size(); ++i)
        if (!grads[i].defined()) grads[i] = torch::zeros_like(leaves[i]);

    torch::NoGradGuard no_grad;
    const auto eval_at = [&](const std::vector<torch::Tensor>& dirs, double t) {
        for (std::size_t i = 0; i < leaves.size(); ++i) leaves[i].add_(dirs[i], t);
        const double v = f().item<double>();
        for (std::size_t i = 0; i < leaves.size(); ++i) leaves[i].sub_(dirs[i], t);
        return v;
    };
    const double h = options.step;
    const auto derivative = [&](const std::vector<torch::Tensor>& dirs) {
        const double f1 = eval_at(dirs, h) - eval_at(dirs, -h);
        const double f2 = eval_at(dirs, 2 * h) - eval_at(dirs, -2 * h);
        return (8.0 * f1 - f2) / (12.0 * h);
    };

    GradCheckResult result;
    const auto record = [&](double a, double n, const std::string& where) {
        const double e = relative_error(a, n);
        ++result.checks;
        if (e >= result.max_rel_error) {
            result.max_rel_error = e;
            result.worst_analytic = a;
            result.worst_numeric = n;
            result.where = where;
        }
    };

    auto gen = torch::make_generator<torch::CPUGeneratorImpl>(options.seed);
    for (int d = 0; d < options.directions; ++d) {
        std::vector<torch::Tensor> dirs;
        double analytic = 0.0;
        for (std::size_t i = 0; i < leaves.size(); ++i) {
            dirs.push_back(torch::randn(leaves[i].sizes(), gen, leaves[i].options().requires_grad(false)));
            analytic += (grads[i] * dirs.back()).sum().item<double>();
        }
        record(analytic, derivative(dirs), "direction " + std::to_string(d));
    }

    double gmax = 0.0;
    for (const auto& g : grads)
        if (g.numel() > 0) gmax = std::max(gmax, g.abs().max().item<double>());
    std::vector<std::pair<std::size_t, int64_t>> candidates;
    for (std::size_t i = 0; i < grads.size(); ++i) {
        const auto flat = grads[i].reshape({-1});
        const auto acc = flat.accessor<double, 1>();
        for (int64_t j = 0; j < flat.numel(); ++j)
            if (std::abs(acc[j]) >= options.coordinate_floor * gmax && gmax > 0.0) candidates.emplace_back(i, j);
    }
    std::mt19937_64 rng(options.seed);
    for (int k = 0; k < options.coordinates && !candidates.empty(); ++k) {
        const auto [i, j] = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
        std::vector<torch::Tensor> dirs;
        for (std::size_t m = 0; m < leaves.size(); ++m) dirs.push_back(torch::zeros_like(leaves[m]));
        dirs[i].view({-1})[j] = 1.0;
        const double analytic = grads[i].reshape({-1})[j].item<double>();
        record(analytic, derivative(dirs), "leaf " + std::to_string(i) + "[" + std::to_string(j) + "]");
    }
    return result;
}

/// Every parameter of a module as leaves.
inline std::vector<torch::Tensor> parameters_of(torch::nn::Module& m) {
    std::vector<torch::Tensor> out;
    for (auto& p : m.parameters()) out.push_back(p);
    return out;
}

/// Replaces all-zero parameters (zero-initialised heads) with small random
/// values so their gradient paths are exercised.
inline void randomize_zero_heads(torch::nn::Module& m, double scale = 0.05, std::uint64_t seed = 3) {
    torch::NoGradGuard guard;
    auto gen = torch::make_generator<torch::CPUGeneratorImpl>(seed);
    for (auto& p : m.parameters())
        if (p.abs().max().item<double>() == 0.0) p.copy_(torch::randn(p.sizes(), gen, p.options()) * scale);
}

}  // namespace turbrec::testing
