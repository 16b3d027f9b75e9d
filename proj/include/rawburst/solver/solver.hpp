#pragma once

#include "rawburst/model/burst.hpp"
#include "rawburst/model/operators.hpp"
#include "rawburst/register/register.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rawburst {

/// Approximate proximal map of a prior: x = argmin 1/2 ||x - z||^2 + gamma * Omega(x).
class PriorOperator {
public:
    virtual ~PriorOperator() = default;
    virtual Image apply(const Image& z, double gamma) const = 0;
    virtual std::string name() const = 0;
};

class IdentityPrior final : public PriorOperator {
public:
    Image apply(const Image& z, double) const override { return z; }
    std::string name() const override { return "none"; }
};

class TvL1Prior final : public PriorOperator {
public:
    explicit TvL1Prior(int iterations = 20) : iterations_(iterations) {}
    Image apply(const Image& z, double gamma) const override;
    std::string name() const override { return "tvl1"; }

private:
    int iterations_;
};

std::shared_ptr<const PriorOperator> make_prior(const std::string& name);

/// Per-pixel weight in [0, 1] from an observed mosaic and its prediction at the same exposure.
class ConfidenceFn {
public:
    virtual ~ConfidenceFn() = default;
    virtual Image operator()(const Image& observed, const Image& predicted) const = 0;
    virtual std::string name() const = 0;
};

class UnitConfidence final : public ConfidenceFn {
public:
    Image operator()(const Image& observed, const Image&) const override {
        return Image(observed.height(), observed.width(), 1, 1.0);
    }
    std::string name() const override { return "unit"; }
};

/// exp(-r^2 / (2 sigma^2)) with r = observed - min(1, predicted), both on the [0, 1] raw scale.
class ResidualConfidence final : public ConfidenceFn {
public:
    explicit ResidualConfidence(double sigma = 0.05);
    Image operator()(const Image& observed, const Image& predicted) const override;
    std::string name() const override { return "residual"; }

private:
    double sigma_;
};

/// Anisotropic TV-l1 proximal map, per channel: exact 1-D proxes along rows and columns
/// combined by `iterations` rounds of Dykstra-type splitting. Exact for 1-D signals.
Image prox_tv_l1(const Image& z, double gamma, int iterations = 20);
double tv_aniso(const Image& x);

struct HqsConfig {
    int stages = 3;
    int gd_steps = 3;
    double step = 0.0;                          // 0: 0.9 / (L + eta) from power iteration
    std::vector<double> etas{1.0, 2.0, 4.0};    // times the data-term Lipschitz constant; doubled past the end
    std::vector<double> gammas{0.05, 0.02, 0.01};  // last value repeated; relative to the mean of init_z
    int power_iterations = 20;
    std::shared_ptr<const PriorOperator> prior = std::make_shared<TvL1Prior>();
    std::shared_ptr<const ConfidenceFn> confidence = std::make_shared<UnitConfidence>();
    bool refine_warps = false;
    RegistrationConfig registration{};
    std::string features = "plain";

    double eta(int stage) const;
    double gamma(int stage) const;
    void validate() const;
};

/// One forward operator per frame over the burst's high-resolution grid.
std::vector<FrameOperator> frame_operators(const Burst& burst, const std::vector<AffineWarpField>& fields);

/// w_k = dt_k m_k / sum_j dt_j m_j * g_k * validity_k, with 1/K where every frame is saturated.
/// `confidences` may be empty (all ones).
std::vector<Image> fusion_weights(const Burst& burst, const std::vector<FrameOperator>& ops,
                                  const std::vector<Image>& confidences = {});

/// Demosaic, normalize by exposure, align on the reference grid, average, upscale by s.
Image init_z(const Burst& burst, const std::vector<AffineWarpField>& fields);

/// 1/2 sum_k ||w_k (A_k z - y_k)||^2 + eta/2 ||z - x||^2
double surrogate_objective(const Image& z, const Image& x, double eta, const Burst& burst,
                           const std::vector<FrameOperator>& ops, const std::vector<Image>& weights);

/// `steps` gradient steps on the surrogate. Appends the objective after each step to `trace`
/// when given. Throws NumericalError on non-finite iterates.
Image z_update(Image z, const Image& x, double eta, double step, int steps, const Burst& burst,
               const std::vector<FrameOperator>& ops, const std::vector<Image>& weights,
               std::vector<double>* trace = nullptr);

/// Largest eigenvalue of sum_k A_k^T diag(w_k^2) A_k by power iteration; one estimate per iteration.
std::vector<double> power_iteration(const std::vector<FrameOperator>& ops, const std::vector<Image>& weights,
                                    int iterations = 20);
double lipschitz_estimate(const std::vector<FrameOperator>& ops, const std::vector<Image>& weights,
                          int iterations = 20);

struct StageTrace {
    int stage = 0;
    double eta = 0.0;    // absolute coupling weight used
    double gamma = 0.0;  // absolute prox strength used
    double step = 0.0;
    double lipschitz = 0.0;
    std::vector<double> objective;  // surrogate after each gradient step
};

struct ReconstructionResult {
    Image x;
    Image z;
    std::vector<AffineWarpField> fields;
    std::vector<Image> weights;
    std::vector<StageTrace> trace;
    std::optional<RegistrationResult> registration;
};

/// Full pipeline. When `fields` is given, registration is skipped and those warps are used.
ReconstructionResult reconstruct(const Burst& burst, const HqsConfig& config,
                                 const std::optional<std::vector<AffineWarpField>>& fields = std::nullopt);

} // namespace rawburst
