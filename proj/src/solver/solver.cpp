#include "rawburst/solver/solver.hpp"

#include "rawburst/merge/demosaic.hpp"
#include "rawburst/merge/hdr.hpp"
#include "rawburst/util/errors.hpp"
#include "rawburst/util/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace rawburst {

// ---------------------------------------------------------------------------------------
// Priors and confidence

namespace {

// Exact 1-D TV proximal map (Condat's direct algorithm), in place over a strided line.
void tv1d_prox(const double* in, double* out, int n, double lambda) {
    if (n <= 0) return;
    int k = 0, k0 = 0, kplus = 0, kminus = 0;
    double umin = lambda, umax = -lambda;
    double vmin = in[0] - lambda, vmax = in[0] + lambda;
    const double twolambda = 2.0 * lambda, minlambda = -lambda;
    for (;;) {
        while (k == n - 1) {
            if (umin < 0.0) {
                do out[k0++] = vmin; while (k0 <= kminus);
                umax = (vmin = in[kminus = k = k0]) + (umin = lambda) - vmax;
            } else if (umax > 0.0) {
                do out[k0++] = vmax; while (k0 <= kplus);
                umin = (vmax = in[kplus = k = k0]) + (umax = minlambda) - vmin;
            } else {
                vmin += umin / (k - k0 + 1);
                do out[k0++] = vmin; while (k0 <= k);
                return;
            }
        }
        if ((umin += in[k + 1] - vmin) < minlambda) {
            do out[k0++] = vmin; while (k0 <= kminus);
            vmax = (vmin = in[kplus = kminus = k = k0]) + twolambda;
            umin = lambda;
            umax = minlambda;
        } else if ((umax += in[k + 1] - vmax) > lambda) {
            do out[k0++] = vmax; while (k0 <= kplus);
            vmin = (vmax = in[kplus = kminus = k = k0]) - twolambda;
            umin = lambda;
            umax = minlambda;
        } else {
            ++k;
            if (umin >= lambda) {
                vmin += (umin - lambda) / ((kminus = k) - k0 + 1);
                umin = lambda;
            }
            if (umax <= minlambda) {
                vmax += (umax + lambda) / ((kplus = k) - k0 + 1);
                umax = minlambda;
            }
        }
    }
}

// Row-wise (horizontal differences) or column-wise 1-D prox of a single-channel plane.
void prox_lines(const std::vector<double>& in, std::vector<double>& out, int h, int w, double gamma, bool rows) {
    const int lines = rows ? h : w, len = rows ? w : h;
    std::vector<double> a(len), b(len);
    for (int l = 0; l < lines; ++l) {
        for (int i = 0; i < len; ++i) a[i] = rows ? in[static_cast<std::size_t>(l) * w + i] : in[static_cast<std::size_t>(i) * w + l];
        tv1d_prox(a.data(), b.data(), len, gamma);
        for (int i = 0; i < len; ++i) (rows ? out[static_cast<std::size_t>(l) * w + i] : out[static_cast<std::size_t>(i) * w + l]) = b[i];
    }
}

} // namespace

Image prox_tv_l1(const Image& z, double gamma, int iterations) {
    require(gamma >= 0.0 && std::isfinite(gamma), "prox_tv_l1: gamma must be finite and >= 0");
    require(iterations >= 1, "prox_tv_l1: need at least one iteration");
    if (gamma == 0.0) return z;
    const int h = z.height(), w = z.width(), ch = z.channels();
    Image out = z;
    // The anisotropic TV splits into a row term and a column term, each with an exact prox;
    // Dykstra-type alternation converges to the prox of the sum.
    parallel_for(ch, [&](int c) {
        const std::size_t n = static_cast<std::size_t>(h) * w;
        std::vector<double> x(n), y(n), p(n, 0.0), q(n, 0.0), t(n);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) x[static_cast<std::size_t>(i) * w + j] = z(i, j, c);
        for (int it = 0; it < iterations; ++it) {
            for (std::size_t i = 0; i < n; ++i) t[i] = x[i] + p[i];
            prox_lines(t, y, h, w, gamma, true);
            for (std::size_t i = 0; i < n; ++i) {
                p[i] = t[i] - y[i];
                t[i] = y[i] + q[i];
            }
            prox_lines(t, x, h, w, gamma, false);
            for (std::size_t i = 0; i < n; ++i) q[i] = t[i] - x[i];
        }
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) out(i, j, c) = x[static_cast<std::size_t>(i) * w + j];
    });
    return out;
}

double tv_aniso(const Image& x) {
    double sum = 0.0;
    for (int c = 0; c < x.channels(); ++c)
        for (int i = 0; i < x.height(); ++i)
            for (int j = 0; j < x.width(); ++j) {
                if (j + 1 < x.width()) sum += std::abs(x(i, j + 1, c) - x(i, j, c));
                if (i + 1 < x.height()) sum += std::abs(x(i + 1, j, c) - x(i, j, c));
            }
    return sum;
}

Image TvL1Prior::apply(const Image& z, double gamma) const { return prox_tv_l1(z, gamma, iterations_); }

std::shared_ptr<const PriorOperator> make_prior(const std::string& name) {
    if (name == "none") return std::make_shared<IdentityPrior>();
    if (name == "tvl1") return std::make_shared<TvL1Prior>();
    throw ValidationError("unknown prior '" + name + "' (expected none or tvl1)");
}

ResidualConfidence::ResidualConfidence(double sigma) : sigma_(sigma) {
    require(sigma > 0.0 && std::isfinite(sigma), "ResidualConfidence: sigma must be > 0");
}

Image ResidualConfidence::operator()(const Image& observed, const Image& predicted) const {
    require(observed.same_shape(predicted), "ResidualConfidence: shape mismatch");
    Image g(observed.height(), observed.width(), observed.channels());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double r = observed.values()[i] - std::min(1.0, predicted.values()[i]);
        g.values()[i] = std::exp(-r * r / (2.0 * sigma_ * sigma_));
    }
    return g;
}

// ---------------------------------------------------------------------------------------
// Configuration

double HqsConfig::eta(int stage) const {
    const int n = static_cast<int>(etas.size());
    if (stage < n) return etas[stage];
    return etas.back() * std::pow(2.0, stage - n + 1);
}

double HqsConfig::gamma(int stage) const {
    return stage < static_cast<int>(gammas.size()) ? gammas[stage] : gammas.back();
}

void HqsConfig::validate() const {
    require(stages >= 1, "HqsConfig: need at least one stage");
    require(gd_steps >= 0, "HqsConfig: negative gradient step count");
    require(step >= 0.0 && std::isfinite(step), "HqsConfig: step must be >= 0 (0 selects the automatic step)");
    require(!etas.empty() && !gammas.empty(), "HqsConfig: empty eta or gamma schedule");
    for (std::size_t i = 0; i < etas.size(); ++i) {
        require(etas[i] >= 0.0 && std::isfinite(etas[i]), "HqsConfig: eta must be finite and >= 0");
        require(i == 0 || etas[i] > etas[i - 1], "HqsConfig: eta schedule must be increasing");
    }
    for (double g : gammas) require(g >= 0.0 && std::isfinite(g), "HqsConfig: gamma must be finite and >= 0");
    require(power_iterations >= 1, "HqsConfig: need at least one power iteration");
    require(prior && confidence, "HqsConfig: prior and confidence must be set");
}

// ---------------------------------------------------------------------------------------
// Weights and initialization

std::vector<FrameOperator> frame_operators(const Burst& burst, const std::vector<AffineWarpField>& fields) {
    require(static_cast<int>(fields.size()) == burst.meta.frame_count, "frame_operators: one field per frame required");
    std::vector<FrameOperator> ops;
    ops.reserve(fields.size());
    for (int k = 0; k < burst.meta.frame_count; ++k)
        ops.emplace_back(burst.lr_height(), burst.lr_width(), burst.meta.scale, burst.frames[k].exposure,
                         burst.pattern(), fields[k]);
    return ops;
}

std::vector<Image> fusion_weights(const Burst& burst, const std::vector<FrameOperator>& ops,
                                  const std::vector<Image>& confidences) {
    const int K = burst.meta.frame_count;
    require(static_cast<int>(ops.size()) == K, "fusion_weights: one operator per frame required");
    require(confidences.empty() || static_cast<int>(confidences.size()) == K,
            "fusion_weights: one confidence map per frame required");
    const int h = burst.lr_height(), w = burst.lr_width();
    std::vector<Image> masks;
    for (const RawFrame& f : burst.frames) masks.push_back(saturation_mask(f.data));

    std::vector<Image> weights(K, Image(h, w, 1));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double total = 0.0;
            for (int k = 0; k < K; ++k) total += burst.frames[k].exposure * masks[k](y, x);
            for (int k = 0; k < K; ++k) {
                const double share = total > 0.0 ? burst.frames[k].exposure * masks[k](y, x) / total : 1.0 / K;
                const double g = confidences.empty() ? 1.0 : confidences[k](y, x);
                weights[k](y, x) = share * g * ops[k].validity()(y, x);
            }
        }
    return weights;
}

namespace {

// Bilinear upscale; high-resolution pixel u samples low-resolution coordinate (u - (s-1)/2) / s,
// clamped to the image.
Image upscale_bilinear(const Image& lr, int scale) {
    if (scale == 1) return lr;
    const int h = lr.height(), w = lr.width(), ch = lr.channels();
    Image out(h * scale, w * scale, ch);
    const double half = 0.5 * (scale - 1);
    for (int y = 0; y < h * scale; ++y) {
        const double fy = std::clamp((y - half) / scale, 0.0, h - 1.0);
        const int y0 = std::min(static_cast<int>(fy), h - 1), y1 = std::min(y0 + 1, h - 1);
        const double ay = fy - y0;
        for (int x = 0; x < w * scale; ++x) {
            const double fx = std::clamp((x - half) / scale, 0.0, w - 1.0);
            const int x0 = std::min(static_cast<int>(fx), w - 1), x1 = std::min(x0 + 1, w - 1);
            const double ax = fx - x0;
            for (int c = 0; c < ch; ++c)
                out(y, x, c) = (1 - ay) * ((1 - ax) * lr(y0, x0, c) + ax * lr(y0, x1, c)) +
                               ay * ((1 - ax) * lr(y1, x0, c) + ax * lr(y1, x1, c));
        }
    }
    return out;
}

} // namespace

Image init_z(const Burst& burst, const std::vector<AffineWarpField>& fields) {
    burst.validate();
    const int K = burst.meta.frame_count, s = burst.meta.scale;
    require(static_cast<int>(fields.size()) == K, "init_z: one field per frame required");
    const int h = burst.lr_height(), w = burst.lr_width();

    std::vector<WarpResult> aligned(K), usable(K);
    parallel_for(K, [&](int k) {
        const RawFrame& f = burst.frames[k];
        const Image rgb = demosaic_bilinear(f.data, burst.pattern()) * (1.0 / f.exposure);
        aligned[k] = align_to_reference(rgb, fields[k], s);
        // A channel is usable where every mosaic sample that fed it is unsaturated.
        const Image unsat = demosaic_bilinear(saturation_mask(f.data), burst.pattern());
        usable[k] = align_to_reference(unsat, fields[k], s);
    });

    Image lr(h, w, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                double num = 0.0, den = 0.0, num_all = 0.0, den_all = 0.0;
                for (int k = 0; k < K; ++k) {
                    const double dt = burst.frames[k].exposure;
                    const double valid = aligned[k].validity(y, x);
                    const double clean = usable[k].image(y, x, c) > 1.0 - 1e-9 ? 1.0 : 0.0;
                    num += dt * valid * clean * aligned[k].image(y, x, c);
                    den += dt * valid * clean;
                    num_all += dt * valid * aligned[k].image(y, x, c);
                    den_all += dt * valid;
                }
                if (den > 0.0)
                    lr(y, x, c) = num / den;
                else if (den_all > 0.0)
                    lr(y, x, c) = num_all / den_all;
                else
                    lr(y, x, c) = 0.0;
            }
    return upscale_bilinear(lr, s);
}

// ---------------------------------------------------------------------------------------
// Data step

namespace {

// sum_k A_k^T (w_k^2 (A_k z - y_k)) and, optionally, 1/2 sum_k ||w_k (A_k z - y_k)||^2.
// Residuals are formed in parallel; the adjoints are accumulated in frame order.
Image data_gradient(const Image& z, const Burst& burst, const std::vector<FrameOperator>& ops,
                    const std::vector<Image>& weights, double* value) {
    const int K = static_cast<int>(ops.size());
    std::vector<Image> residuals(K);
    std::vector<double> values(K, 0.0);
    parallel_for(K, [&](int k) {
        Image r = ops[k].apply(z);
        r -= burst.frames[k].data;
        double v = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            const double wk = weights[k].values()[i];
            v += wk * wk * r.values()[i] * r.values()[i];
            r.values()[i] *= wk * wk;
        }
        values[k] = 0.5 * v;
        residuals[k] = std::move(r);
    });
    Image g(z.height(), z.width(), z.channels());
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
        ops[k].adjoint_accumulate(residuals[k], g);
        total += values[k];
    }
    if (value) *value = total;
    return g;
}

void check_consistency(const Burst& burst, const std::vector<FrameOperator>& ops, const std::vector<Image>& weights) {
    require(ops.size() == burst.frames.size() && weights.size() == burst.frames.size(),
            "solver: operators, weights and frames differ in count");
    for (std::size_t k = 0; k < ops.size(); ++k)
        require(weights[k].same_shape(burst.frames[k].data), "solver: weight map does not match its frame");
}

} // namespace

double surrogate_objective(const Image& z, const Image& x, double eta, const Burst& burst,
                           const std::vector<FrameOperator>& ops, const std::vector<Image>& weights) {
    check_consistency(burst, ops, weights);
    double value = 0.0;
    data_gradient(z, burst, ops, weights, &value);
    const Image d = z - x;
    return value + 0.5 * eta * squared_norm(d);
}

Image z_update(Image z, const Image& x, double eta, double step, int steps, const Burst& burst,
               const std::vector<FrameOperator>& ops, const std::vector<Image>& weights, std::vector<double>* trace) {
    check_consistency(burst, ops, weights);
    require(z.same_shape(x), "z_update: z and x differ in shape");
    require(step > 0.0 && std::isfinite(step), "z_update: step must be > 0");
    // The objective after step i is read off the residual pass of step i + 1.
    for (int i = 0; i < steps; ++i) {
        double value = 0.0;
        Image g = data_gradient(z, burst, ops, weights, &value);
        Image d = z - x;
        if (trace && i > 0) trace->push_back(value + 0.5 * eta * squared_norm(d));
        if (eta != 0.0) {
            d *= eta;
            g += d;
        }
        g *= step;
        z -= g;
        if (!all_finite(z)) {
            std::string msg = "z_update: diverged at step " + std::to_string(i + 1);
            if (trace && !trace->empty()) msg += " (last objective " + std::to_string(trace->back()) + ")";
            throw NumericalError(msg);
        }
    }
    if (trace && steps > 0) trace->push_back(surrogate_objective(z, x, eta, burst, ops, weights));
    return z;
}

std::vector<double> power_iteration(const std::vector<FrameOperator>& ops, const std::vector<Image>& weights,
                                    int iterations) {
    require(!ops.empty() && ops.size() == weights.size(), "power_iteration: operators and weights differ in count");
    require(iterations >= 1, "power_iteration: need at least one iteration");
    const FrameOperator& a0 = ops.front();
    // Deterministic start with a little texture so no eigenvector is missed by symmetry.
    Image v(a0.hr_height(), a0.hr_width(), 3);
    for (int y = 0; y < v.height(); ++y)
        for (int x = 0; x < v.width(); ++x)
            for (int c = 0; c < 3; ++c) v(y, x, c) = 1.0 + 0.1 * std::sin(0.7 * x + 1.3 * y + 2.1 * c);
    v *= 1.0 / std::sqrt(squared_norm(v));

    const int K = static_cast<int>(ops.size());
    std::vector<double> estimates;
    for (int it = 0; it < iterations; ++it) {
        std::vector<Image> parts(K);
        parallel_for(K, [&](int k) {
            Image r = ops[k].apply(v);
            for (std::size_t i = 0; i < r.size(); ++i) {
                const double wk = weights[k].values()[i];
                r.values()[i] *= wk * wk;
            }
            parts[k] = ops[k].adjoint(r);
        });
        Image hv(v.height(), v.width(), v.channels());
        for (const Image& p : parts) hv += p;
        const double norm = std::sqrt(squared_norm(hv));
        estimates.push_back(norm);
        if (norm == 0.0) break;
        v = hv * (1.0 / norm);
    }
    return estimates;
}

double lipschitz_estimate(const std::vector<FrameOperator>& ops, const std::vector<Image>& weights, int iterations) {
    return power_iteration(ops, weights, iterations).back();
}

// ---------------------------------------------------------------------------------------
// Pipeline

namespace {

// Frame k as predicted from x: A_k with identity warp, i.e. the reference geometry at frame k's exposure.
RawFrame render_reference(const Image& x, const Burst& burst, int k) {
    const FrameOperator a(burst.lr_height(), burst.lr_width(), burst.meta.scale, burst.frames[k].exposure,
                          burst.pattern(), AffineWarpField::identity(x.height(), x.width()));
    RawFrame out = burst.frames[k];
    out.data = a.apply(x);
    for (double& v : out.data.values()) v = std::clamp(v, 0.0, 1.0);
    return out;
}

std::vector<Image> confidence_maps(const Image& x, const Burst& burst, const std::vector<FrameOperator>& ops,
                                   const ConfidenceFn& confidence) {
    std::vector<Image> maps(ops.size());
    parallel_for(static_cast<int>(ops.size()), [&](int k) {
        maps[k] = confidence(burst.frames[k].data, ops[k].apply(x));
        for (double v : maps[k].values())
            if (!(v >= 0.0 && v <= 1.0)) throw NumericalError("confidence values must lie in [0, 1]");
    });
    return maps;
}

} // namespace

ReconstructionResult reconstruct(const Burst& burst, const HqsConfig& config,
                                 const std::optional<std::vector<AffineWarpField>>& fields) {
    burst.validate();
    config.validate();
    const int K = burst.meta.frame_count;
    ReconstructionResult result;

    const std::unique_ptr<FeatureExtractor> extractor = make_extractor(config.features);
    if (fields) {
        require(static_cast<int>(fields->size()) == K, "reconstruct: one warp field per frame required");
        for (const AffineWarpField& f : *fields) {
            require(f.height() == burst.hr_height() && f.width() == burst.hr_width(),
                    "reconstruct: warp field does not cover the high-resolution grid");
            f.validate();
        }
        result.fields = *fields;
    } else if (K == 1) {
        result.fields = {AffineWarpField::identity(burst.hr_height(), burst.hr_width(), config.registration.tile_size)};
    } else {
        result.registration = register_burst(burst, *extractor, config.registration);
        result.fields = result.registration->fields;
    }

    Image z = init_z(burst, result.fields);
    Image x = z;
    // Prox strengths are relative to the scene level so they do not depend on the scene gain.
    const double level = std::max(mean_value(z), 1e-12);
    const bool coupled = dynamic_cast<const IdentityPrior*>(config.prior.get()) == nullptr;

    for (int t = 0; t < config.stages; ++t) {
        StageTrace st;
        st.stage = t;
        st.gamma = config.gamma(t) * level;
        const std::vector<FrameOperator> ops = frame_operators(burst, result.fields);
        const bool unit = dynamic_cast<const UnitConfidence*>(config.confidence.get()) != nullptr;
        result.weights = fusion_weights(burst, ops, unit ? std::vector<Image>{} : confidence_maps(x, burst, ops, *config.confidence));
        st.lipschitz = lipschitz_estimate(ops, result.weights, config.power_iterations);
        // eta is expressed in units of the data-term curvature, so the schedule does not depend
        // on K, the exposures or the weights.
        // With no prior the x-update is x = z, so the coupling only slows the data step; drop it.
        st.eta = coupled ? config.eta(t) * st.lipschitz : 0.0;
        st.step = config.step > 0.0 ? config.step : 0.9 / (st.lipschitz + st.eta);
        if (!(st.lipschitz > 0.0) && config.step == 0.0) st.step = 0.0;  // nothing observed: no data step
        st.objective.push_back(surrogate_objective(z, x, st.eta, burst, ops, result.weights));
        if (st.step > 0.0)
            z = z_update(std::move(z), x, st.eta, st.step, config.gd_steps, burst, ops, result.weights, &st.objective);
        x = config.prior->apply(z, st.gamma);
        if (!all_finite(x)) throw NumericalError("reconstruct: prior produced non-finite values at stage " + std::to_string(t));
        result.trace.push_back(std::move(st));

        if (config.refine_warps && K > 1 && t + 1 < config.stages) {
            parallel_for(K, [&](int k) {
                if (k == burst.meta.reference) return;
                result.fields[k] = refine_field(render_reference(x, burst, k), burst.frames[k], result.fields[k],
                                                burst.meta.scale, *extractor, config.registration.iters_per_level);
            });
        }
    }
    result.x = std::move(x);
    result.z = std::move(z);
    return result;
}

} // namespace rawburst
