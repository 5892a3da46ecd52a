#include "crl/sgda.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace crl {

namespace {

Vec cumulative(std::span<const double> p) {
    Vec cdf(p.size());
    std::partial_sum(p.begin(), p.end(), cdf.begin());
    return cdf;
}

std::size_t draw_from_cdf(std::span<const double> cdf, Rng& rng) {
    const double u = uniform01(rng) * cdf.back();
    // first entry with cdf > u, which always has positive mass since u < cdf.back()
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

double norm2(std::span<const double> x) {
    return std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
}

}  // namespace

ModelSampler::ModelSampler(CmdpModel model) : model_(std::move(model)) {
    initial_cdf_ = cumulative(model_.initial_dist());
    const std::size_t ns = model_.n_states();
    transition_cdf_.resize(model_.n_actions() * ns * ns);
    for (std::size_t a = 0; a < model_.n_actions(); ++a) {
        for (std::size_t s = 0; s < ns; ++s) {
            const Vec row = cumulative(model_.transition_row(a, s));
            std::copy(row.begin(), row.end(), transition_cdf_.begin() + static_cast<std::ptrdiff_t>((a * ns + s) * ns));
        }
    }
}

std::size_t ModelSampler::sample_initial(Rng& rng) const { return draw_from_cdf(initial_cdf_, rng); }

std::size_t ModelSampler::sample_transition(std::size_t s, std::size_t a, Rng& rng) const {
    const std::size_t ns = model_.n_states();
    return draw_from_cdf({transition_cdf_.data() + (a * ns + s) * ns, ns}, rng);
}

RewardSample ModelSampler::rewards(std::size_t s, std::size_t a) const {
    RewardSample out{model_.reward(s, a), Vec(model_.n_constraints())};
    for (std::size_t i = 0; i < model_.n_constraints(); ++i) out.constraints[i] = model_.constraint_reward(i, s, a);
    return out;
}

SamplingDistribution::SamplingDistribution(std::size_t n_states, std::size_t n_actions, Vec xi)
    : n_states_(n_states), n_actions_(n_actions), xi_(std::move(xi)) {
    if (xi_.size() != n_states_ * n_actions_) throw std::invalid_argument("sampling distribution has wrong size");
    double total = 0.0;
    for (double p : xi_) {
        if (!(p >= 0.0)) throw std::invalid_argument("sampling distribution has a negative entry");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("sampling distribution must sum to 1");
    cdf_ = cumulative(xi_);
}

SamplingDistribution SamplingDistribution::uniform(std::size_t n_states, std::size_t n_actions) {
    const std::size_t n = n_states * n_actions;
    return SamplingDistribution(n_states, n_actions, Vec(n, 1.0 / static_cast<double>(n)));
}

std::size_t SamplingDistribution::sample(Rng& rng) const {
    return draw_from_cdf(cdf_, rng);
}

void StepSchedule::validate() const {
    if (!(a0 > 0.0)) throw std::invalid_argument("sgda.a0 must be positive");
    if (!(n0 >= 1.0)) throw std::invalid_argument("sgda.n0 must be at least 1");
    if (!(kappa > 0.5 && kappa <= 1.0))
        throw std::invalid_argument("sgda.kappa must lie in (0.5, 1] so that steps are not summable but square-summable");
}

double StepSchedule::alpha(std::uint64_t n) const { return a0 / std::pow(n0 + static_cast<double>(n), kappa); }

SgdaState SgdaState::initial(const GenerativeModel& gen, std::uint64_t seed) {
    SgdaState s;
    s.blocks.lambda.assign(gen.n_states() * gen.n_actions(), 1.0 / static_cast<double>(gen.n_states() * gen.n_actions()));
    s.blocks.lambda_hat = s.blocks.lambda;
    s.blocks.mu.assign(gen.n_constraints(), 0.0);
    s.blocks.mu_hat = s.blocks.mu;
    s.blocks.v.assign(gen.n_states(), 0.0);
    s.blocks.v_hat = s.blocks.v;
    s.seed = seed;
    s.rng.seed(seed);
    return s;
}

SampleTriple draw_sample(const GenerativeModel& gen, const SamplingDistribution& xi, Rng& rng) {
    SampleTriple t;
    t.s0 = gen.sample_initial(rng);
    t.pair = xi.sample(rng);
    t.s = t.pair % gen.n_states();
    t.a = t.pair / gen.n_states();
    t.next = gen.sample_transition(t.s, t.a, rng);
    return t;
}

double estimate_lagrangian(const GenerativeModel& gen,
                           const SamplingDistribution& xi,
                           std::span<const double> lambda,
                           std::span<const double> mu,
                           std::span<const double> v,
                           Rng& rng) {
    const SampleTriple t = draw_sample(gen, xi, rng);
    const double gamma = gen.discount();
    double estimate = (1.0 - gamma) * v[t.s0];
    for (std::size_t i = 0; i < mu.size(); ++i) estimate -= mu[i] * gen.thresholds()[i];
    const double p = xi.probability(t.pair);
    if (p > 0.0) {
        const RewardSample rs = gen.rewards(t.s, t.a);
        double td = rs.reward - v[t.s] + gamma * v[t.next];
        for (std::size_t i = 0; i < mu.size(); ++i) td += mu[i] * rs.constraints[i];
        estimate += lambda[t.pair] * td / p;
    }
    return estimate;
}

CrlDrift sgda_increment(const GenerativeModel& gen,
                        const SamplingDistribution& xi,
                        const CrlSaddleState& state,
                        const SampleTriple& sample,
                        double alpha,
                        const SgdaOptions& options) {
    const double gamma = gen.discount();
    const double inv_rho = 1.0 / options.rho;
    const std::size_t ns = gen.n_states();
    const std::size_t ni = gen.n_constraints();
    const std::size_t np = state.lambda.size();
    const double p = xi.probability(sample.pair);
    const double weight = p > 0.0 ? state.lambda[sample.pair] / p : 0.0;
    const RewardSample rs = gen.rewards(sample.s, sample.a);

    CrlDrift inc;

    inc.v.resize(ns);
    inc.v_hat.resize(ns);
    for (std::size_t s = 0; s < ns; ++s) {
        inc.v[s] = -inv_rho * (state.v[s] - state.v_hat[s]);
        inc.v_hat[s] = alpha * inv_rho * (state.v[s] - state.v_hat[s]);
    }
    inc.v[sample.s] += weight;
    inc.v[sample.next] -= gamma * weight;
    inc.v[sample.s0] -= 1.0 - gamma;
    for (double& x : inc.v) x *= alpha;

    inc.mu.resize(ni);
    inc.mu_hat.resize(ni);
    for (std::size_t i = 0; i < ni; ++i) {
        inc.mu[i] = alpha * (gen.thresholds()[i] - weight * rs.constraints[i] - inv_rho * (state.mu[i] - state.mu_hat[i]));
        inc.mu_hat[i] = alpha * inv_rho * (state.mu[i] - state.mu_hat[i]);
    }

    const double hat_step = options.literal_lambda_hat ? 1.0 : alpha;
    inc.lambda.resize(np);
    inc.lambda_hat.resize(np);
    for (std::size_t k = 0; k < np; ++k) {
        inc.lambda[k] = -alpha * inv_rho * (state.lambda[k] - state.lambda_hat[k]);
        inc.lambda_hat[k] = hat_step * inv_rho * (state.lambda[k] - state.lambda_hat[k]);
    }
    if (p > 0.0) {
        double td = rs.reward - state.v[sample.s] + gamma * state.v[sample.next];
        for (std::size_t i = 0; i < ni; ++i) td += state.mu[i] * rs.constraints[i];
        inc.lambda[sample.pair] += alpha * td / p;
    }
    return inc;
}

namespace {

void apply(const ConvexSet& set, Vec& x, const Vec& increment) {
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += increment[k];
    set.project_in_place(x);
}

void verify(const ConvexSet& set, const Vec& x, const char* block, std::uint64_t n) {
    if (!set.contains(x, 1e-12))
        throw std::logic_error(std::string("sgda: block ") + block + " left its set at step " + std::to_string(n));
}

}  // namespace

void sgda_step(const GenerativeModel& gen,
               const SamplingDistribution& xi,
               SgdaState& state,
               const StepSchedule& schedule,
               const SgdaOptions& options,
               const CrlSets& sets) {
    const SampleTriple sample = draw_sample(gen, xi, state.rng);
    const CrlDrift inc = sgda_increment(gen, xi, state.blocks, sample, schedule.alpha(state.n), options);
    CrlSaddleState& b = state.blocks;
    apply(sets.lambda, b.lambda, inc.lambda);
    apply(sets.lambda, b.lambda_hat, inc.lambda_hat);
    if (sets.mu) {
        apply(*sets.mu, b.mu, inc.mu);
        apply(*sets.mu, b.mu_hat, inc.mu_hat);
    }
    apply(sets.v, b.v, inc.v);
    apply(sets.v, b.v_hat, inc.v_hat);
    ++state.n;

    if (options.verify_sets) {
        verify(sets.lambda, b.lambda, "lambda", state.n);
        verify(sets.lambda, b.lambda_hat, "lambda_hat", state.n);
        if (sets.mu) {
            verify(*sets.mu, b.mu, "mu", state.n);
            verify(*sets.mu, b.mu_hat, "mu_hat", state.n);
        }
        verify(sets.v, b.v, "v", state.n);
        verify(sets.v, b.v_hat, "v_hat", state.n);
    }
}

SgdaRun run_sgda(const GenerativeModel& gen,
                 const SamplingDistribution& xi,
                 SgdaState state0,
                 const StepSchedule& schedule,
                 const SgdaOptions& options,
                 const CrlSets& sets,
                 std::uint64_t budget,
                 std::uint64_t stride,
                 const SgdaDiagnostics& diagnostics) {
    schedule.validate();
    if (!(options.rho > 0.0)) throw std::invalid_argument("sgda.rho must be positive");
    if (stride == 0) throw std::invalid_argument("diagnostics stride must be positive");
    if (xi.n_states() != gen.n_states() || xi.n_actions() != gen.n_actions())
        throw std::invalid_argument("sampling distribution does not match the generative model");

    SgdaRun run{std::move(state0), {}};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::uint64_t k = 0; k < budget; ++k) {
        sgda_step(gen, xi, run.final, schedule, options, sets);
        if (k + 1 != budget && run.final.n % stride != 0) continue;

        const CrlSaddleState& b = run.final.blocks;
        SgdaMetrics m;
        m.n = run.final.n;
        m.alpha = schedule.alpha(run.final.n - 1);
        m.objective = nan;
        m.constraints.assign(gen.n_constraints(), nan);
        if (diagnostics.model) {
            const OccupancyValues values = value_of_occupancy(*diagnostics.model, b.lambda);
            m.objective = values.reward;
            m.constraints = values.constraints;
        }
        m.lambda_gap_inf = nan;
        if (diagnostics.reference_lambda) {
            m.lambda_gap_inf = 0.0;
            for (std::size_t j = 0; j < b.lambda.size(); ++j)
                m.lambda_gap_inf = std::max(m.lambda_gap_inf, std::abs(b.lambda[j] - (*diagnostics.reference_lambda)[j]));
        }
        m.mu_norm = norm2(b.mu);
        m.v_norm = norm2(b.v);
        run.timeline.push_back(std::move(m));
    }
    return run;
}

}  // namespace crl
