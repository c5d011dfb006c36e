#include "sdfsplat/optimizer.hpp"

#include "sdfsplat/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sdfsplat {

StageSchedule StageSchedule::with_regularized(int regularized, int total) {
    StageSchedule s;
    s.regularized = regularized;
    s.refinement = total - (s.vanilla + s.opacity + regularized);
    s.validate();
    return s;
}

StageSchedule StageSchedule::published(int regularized) {
    if (regularized == 6000) return with_regularized(6000);
    if (regularized == 13000) return StageSchedule{7000, 2000, 13000, 7000};
    throw InvalidParameter("regularized stage length must be 6000 or 13000");
}

std::array<int, 4> StageSchedule::boundaries() const {
    return {vanilla, vanilla + opacity, vanilla + opacity + regularized, total()};
}

Stage StageSchedule::stage_at(int iter) const {
    if (iter < 0 || iter >= total()) throw ContractViolation("iteration outside the schedule");
    const auto b = boundaries();
    if (iter < b[0]) return Stage::Vanilla;
    if (iter < b[1]) return Stage::Opacity;
    if (iter < b[2]) return Stage::Regularized;
    return Stage::Refinement;
}

void StageSchedule::validate() const {
    if (vanilla < 0 || opacity < 0 || regularized < 0 || refinement < 0)
        throw InvalidParameter("stage lengths must be non-negative");
}

void LearningRates::validate() const {
    for (double r : {mean_init, mean_final, rotation, log_scale, opacity_logit, sh_dc})
        if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidParameter("learning rates must be finite and non-negative");
    if (!(sh_rest_divisor > 0.0)) throw InvalidParameter("sh_rest_divisor must be positive");
    if (mean_init > 0.0 && !(mean_final > 0.0)) throw InvalidParameter("mean_final must be positive for log decay");
}

StepRates step_rates(const LearningRates& lr, double extent, int iter, int max_steps) {
    StepRates r;
    const double t = max_steps > 0 ? std::clamp(static_cast<double>(iter) / max_steps, 0.0, 1.0) : 0.0;
    r.mean = lr.mean_init > 0.0 ? extent * std::exp((1.0 - t) * std::log(lr.mean_init) + t * std::log(lr.mean_final))
                                : 0.0;
    r.rotation = lr.rotation;
    r.log_scale = lr.log_scale;
    r.opacity_logit = lr.opacity_logit;
    r.sh_dc = lr.sh_dc;
    r.sh_rest = lr.sh_dc / lr.sh_rest_divisor;
    return r;
}

void AdamState::remap(const std::vector<bool>& keep, std::size_t added) {
    if (keep.size() != size()) throw ContractViolation("AdamState::remap: mask size mismatch");
    std::size_t out = 0;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) continue;
        m[out] = m[i];
        v[out] = v[i];
        steps[out] = steps[i];
        ++out;
    }
    m.resize(out);
    v.resize(out);
    steps.resize(out);
    m.resize(out + added);
    v.resize(out + added);
    steps.resize(out + added, 0);
}

namespace {

struct Moments {
    double b1, b2, eps, c1, c2;

    // Updates one scalar parameter in place.
    void operator()(double& p, double g, double& m, double& v, double lr) const {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        p -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
    }
};

}  // namespace

std::size_t adam_step(GaussianSet& gaussians, std::span<const GaussianGrad> grads, AdamState& state,
                      const StepRates& rates, const AdamConfig& cfg) {
    const std::size_t n = gaussians.size();
    if (grads.size() != n || state.size() != n) throw ContractViolation("adam_step: shape mismatch");
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const GaussianGrad& g = grads[i];
        if (!g.all_finite()) {
            ++skipped;
            continue;
        }
        Gaussian& p = gaussians.items[i];
        GaussianGrad& m = state.m[i];
        GaussianGrad& v = state.v[i];
        const auto t = static_cast<double>(++state.steps[i]);
        const Moments upd{cfg.beta1, cfg.beta2, cfg.epsilon, 1.0 - std::pow(cfg.beta1, t),
                          1.0 - std::pow(cfg.beta2, t)};
        for (int k = 0; k < 3; ++k) {
            upd(p.mean[k], g.mean[k], m.mean[k], v.mean[k], rates.mean);
            upd(p.log_scale[k], g.log_scale[k], m.log_scale[k], v.log_scale[k], rates.log_scale);
        }
        for (int k = 0; k < 4; ++k) upd(p.rotation[k], g.rotation[k], m.rotation[k], v.rotation[k], rates.rotation);
        upd(p.opacity_logit, g.opacity_logit, m.opacity_logit, v.opacity_logit, rates.opacity_logit);
        for (int k = 0; k < kShBasisCount; ++k)
            for (int c = 0; c < 3; ++c)
                upd(p.sh(k, c), g.sh(k, c), m.sh(k, c), v.sh(k, c), k == 0 ? rates.sh_dc : rates.sh_rest);

        const double qn = p.rotation.norm();
        p.rotation = qn > 0.0 && std::isfinite(qn) ? Vec4(p.rotation / qn) : Vec4(1.0, 0.0, 0.0, 0.0);
        p.opacity_logit = std::clamp(p.opacity_logit, -kMaxOpacityLogit, kMaxOpacityLogit);
    }
    return skipped;
}

void DensifyStats::accumulate(const ParamGradients& grads) {
    if (grads.size() != grad_sum.size()) throw ContractViolation("DensifyStats: size mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (grads.hit_count[i] == 0) continue;
        grad_sum[i] += grads.mean2d_grad_norm[i];
        views[i] += 1;
    }
}

void DensifyStats::reset(std::size_t n) {
    grad_sum.assign(n, 0.0);
    views.assign(n, 0);
}

void DensifyConfig::validate() const {
    if (interval <= 0) throw InvalidParameter("densify interval must be positive");
    if (!(grad_threshold > 0.0)) throw InvalidParameter("densify gradient threshold must be positive");
    if (!(split_factor > 1.0)) throw InvalidParameter("split factor must exceed 1");
    if (!(clone_scale_fraction >= 0.0)) throw InvalidParameter("clone scale fraction must be non-negative");
    if (!(prune_opacity >= 0.0 && prune_opacity < 1.0)) throw InvalidParameter("prune opacity must lie in [0, 1)");
    if (opacity_reset_interval < 0) throw InvalidParameter("opacity reset interval must be non-negative");
    if (!(reset_opacity > 0.0 && reset_opacity < 1.0)) throw InvalidParameter("reset opacity must lie in (0, 1)");
}

void reset_opacities(GaussianSet& gaussians, AdamState& state, double ceiling) {
    if (state.size() != gaussians.size()) throw ContractViolation("reset_opacities: Adam state size mismatch");
    const double cap = logit(ceiling);
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        double& l = gaussians.items[i].opacity_logit;
        l = std::min(l, cap);
        state.m[i].opacity_logit = 0.0;
        state.v[i].opacity_logit = 0.0;
    }
}

DensifyOutcome densify_and_prune(GaussianSet& gaussians, AdamState& state, const DensifyStats& stats,
                                 const DensifyConfig& cfg, double extent, std::mt19937_64& rng) {
    const std::size_t n = gaussians.size();
    if (stats.grad_sum.size() != n || state.size() != n) throw ContractViolation("densify_and_prune: shape mismatch");

    std::vector<std::pair<double, std::size_t>> candidates;
    for (std::size_t i = 0; i < n; ++i) {
        if (stats.views[i] == 0) continue;
        const double mean_grad = stats.grad_sum[i] / stats.views[i];
        if (mean_grad >= cfg.grad_threshold) candidates.emplace_back(mean_grad, i);
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    const std::size_t budget = cfg.max_gaussians > n ? cfg.max_gaussians - n : 0;
    if (candidates.size() > budget) candidates.resize(budget);
    std::vector<std::size_t> chosen;
    for (const auto& c : candidates) chosen.push_back(c.second);
    std::sort(chosen.begin(), chosen.end());

    DensifyOutcome out;
    std::vector<bool> keep(n, true);
    std::vector<Gaussian> children;
    std::normal_distribution<double> normal(0.0, 1.0);
    const double clone_limit = cfg.clone_scale_fraction * extent;
    for (std::size_t i : chosen) {
        const Gaussian& g = gaussians.items[i];
        if (g.scale().maxCoeff() <= clone_limit) {
            children.push_back(g);
            ++out.cloned;
            continue;
        }
        keep[i] = false;
        const Mat3 r = rotation_matrix(g.rotation);
        const Vec3 s = g.scale();
        for (int c = 0; c < 2; ++c) {
            Gaussian child = g;
            const Vec3 z(normal(rng), normal(rng), normal(rng));
            child.mean = g.mean + r * s.cwiseProduct(z);
            child.log_scale = g.log_scale.array() - std::log(cfg.split_factor);
            children.push_back(child);
        }
        ++out.split;
    }

    for (std::size_t i = 0; i < n; ++i)
        if (keep[i] && gaussians.items[i].opacity() < cfg.prune_opacity) {
            keep[i] = false;
            ++out.pruned;
        }
    std::vector<bool> keep_child(children.size(), true);
    std::size_t child_count = 0;
    for (std::size_t c = 0; c < children.size(); ++c) {
        keep_child[c] = children[c].opacity() >= cfg.prune_opacity;
        if (keep_child[c]) ++child_count;
        else ++out.pruned;
    }

    std::vector<Gaussian> next;
    next.reserve(n + child_count);
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i]) next.push_back(gaussians.items[i]);
    for (std::size_t c = 0; c < children.size(); ++c)
        if (keep_child[c]) next.push_back(children[c]);
    gaussians.items = std::move(next);
    state.remap(keep, child_count);
    return out;
}

double semi_transparent_fraction(const GaussianSet& gaussians) {
    if (gaussians.empty()) return 0.0;
    std::size_t count = 0;
    for (const auto& g : gaussians.items) {
        const double a = g.opacity();
        if (a > 0.05 && a < 0.95) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(gaussians.size());
}

}  // namespace sdfsplat
