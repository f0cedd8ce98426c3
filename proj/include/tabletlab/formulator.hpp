#pragma once

// In-silico formulation search: NSGA-II over two filler choices, their mass
// split and the main compression pressure, maximizing blend FFC subject to
// risk-adjusted porosity and tensile-strength constraints.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "tabletlab/core.hpp"
#include "tabletlab/error.hpp"
#include "tabletlab/io.hpp"
#include "tabletlab/materials.hpp"
#include "tabletlab/mixture.hpp"
#include "tabletlab/surrogate.hpp"

namespace tabletlab::formulator {

using Eigen::MatrixXd;
using surrogate::EnsemblePrediction;

struct Genome {
    int excipient1 = 0;
    int excipient2 = 0;
    double split = 0.5;      // share of the free mass given to excipient1
    double pressure = 150.0;  // MPa

    auto key() const { return std::tie(excipient1, excipient2, split, pressure); }
    bool operator==(const Genome& o) const { return key() == o.key(); }
    bool operator<(const Genome& o) const { return key() < o.key(); }
};

struct RobustConstraintConfig {
    double theta_sigma = 2.0;  // MPa
    double theta_eps = 0.15;
    double alpha = 0.2;
    double beta = 0.2;
};

struct FormulatorConfig {
    std::vector<std::string> excipients{"MCC1", "MCC2", "MCC3", "LAC1", "LAC2", "MAN"};
    std::string disintegrant = "CCS";
    double disintegrant_fraction = 0.035;
    std::string lubricant = "MgSt";
    double lubricant_fraction = 0.01;
    double min_pressure = 70.0;
    double max_pressure = 450.0;
    int population = 30;
    int generations = 50;
    double crossover_probability = 0.9;
    double sbx_eta = 15.0;
    double mutation_eta = 20.0;
    double mutation_probability = 0.5;     // per continuous gene
    double categorical_mutation = 0.25;    // per categorical gene
    std::optional<double> split_step;      // snap genes to a grid when set
    std::optional<double> pressure_step;
    RobustConstraintConfig constraints;
};

/// Fixed API, disintegrant and lubricant; the remaining mass is split between
/// the two excipients (merged when they coincide). Zero fractions are dropped.
inline Formulation decode_genome(const Genome& g, const std::string& api, double loading, const FormulatorConfig& cfg) {
    const double fixed = cfg.disintegrant_fraction + cfg.lubricant_fraction;
    if (!(loading >= 0.0) || !(loading + fixed < 1.0))
        throw Error(ErrorCode::LoadingTooHigh, "loading " + io::fmt(loading) + " leaves no excipient mass");
    const auto n = static_cast<int>(cfg.excipients.size());
    if (g.excipient1 < 0 || g.excipient1 >= n || g.excipient2 < 0 || g.excipient2 >= n)
        throw Error(ErrorCode::UnknownExcipient, "excipient index out of range");
    const double free = 1.0 - loading - fixed;
    const double s = std::clamp(g.split, 0.0, 1.0);
    const double f1 = s * free;
    const double f2 = free - f1;
    Formulation f;
    if (loading > 0.0) f.components.push_back({api, loading});
    const auto& e1 = cfg.excipients[static_cast<std::size_t>(g.excipient1)];
    const auto& e2 = cfg.excipients[static_cast<std::size_t>(g.excipient2)];
    if (e1 == e2) {
        f.components.push_back({e1, free});
    } else {
        if (f1 > 0.0) f.components.push_back({e1, f1});
        if (f2 > 0.0) f.components.push_back({e2, f2});
    }
    f.components.push_back({cfg.disintegrant, cfg.disintegrant_fraction});
    f.components.push_back({cfg.lubricant, cfg.lubricant_fraction});
    return f;
}

struct Constraints {
    double g1 = 0.0;  // tensile strength
    double g2 = 0.0;  // porosity

    bool feasible() const { return g1 < 0.0 && g2 < 0.0; }
    double violation() const {
        // strict inequalities: a value of exactly 0 counts as a (zero-size) violation
        return (g1 >= 0.0 ? g1 + std::numeric_limits<double>::min() : 0.0) +
               (g2 >= 0.0 ? g2 + std::numeric_limits<double>::min() : 0.0);
    }
};

inline Constraints robust_constraints(const EnsemblePrediction& sigma, const EnsemblePrediction& eps,
                                      const RobustConstraintConfig& cfg) {
    return {cfg.theta_sigma - (sigma.mean - cfg.alpha * sigma.std), cfg.theta_eps - (eps.mean - cfg.beta * eps.std)};
}

struct Predictions {
    std::vector<EnsemblePrediction> porosity;
    std::vector<EnsemblePrediction> tensile_strength;
};

/// Maps a batch of feature rows to porosity and tensile-strength predictions.
using Predictor = std::function<Predictions(const MatrixXd&)>;

inline Predictor ensemble_predictor(const surrogate::SurrogateModels& models) {
    return [&models](const MatrixXd& x) {
        return Predictions{surrogate::predict(models.porosity, x), surrogate::predict(models.tensile_strength, x)};
    };
}

struct Evaluation {
    Genome genome;
    Formulation formulation;
    double ffc = 0.0;
    double objective = 0.0;  // -FFC
    Constraints constraints;
    EnsemblePrediction porosity;
    EnsemblePrediction tensile_strength;
};

class Evaluator {
public:
    Evaluator(const mixture::MixtureModel& model, Predictor predictor, std::string api, double loading,
              FormulatorConfig cfg)
        : model_(model), predictor_(std::move(predictor)), api_(std::move(api)), loading_(loading), cfg_(std::move(cfg)) {
        if (cfg_.excipients.empty()) throw Error(ErrorCode::NoExcipientsAllowed, "empty excipient list");
        for (const auto& e : cfg_.excipients)
            if (!model_.library.contains(e)) throw Error(ErrorCode::UnknownExcipient, e);
        if (!(cfg_.max_pressure > cfg_.min_pressure)) throw Error(ErrorCode::InvalidBounds, "pressure bounds");
    }

    const FormulatorConfig& config() const { return cfg_; }
    const std::string& api() const { return api_; }
    double loading() const { return loading_; }
    long evaluations() const { return evaluations_; }

    std::vector<Evaluation> evaluate(const std::vector<Genome>& genomes) {
        std::vector<Evaluation> out(genomes.size());
        MatrixXd x(static_cast<Eigen::Index>(genomes.size()), static_cast<Eigen::Index>(surrogate::kFeatureCount));
        for (std::size_t i = 0; i < genomes.size(); ++i) {
            auto& e = out[i];
            e.genome = genomes[i];
            e.formulation = decode_genome(genomes[i], api_, loading_, cfg_);
            const auto blend = mixture::blend_properties(e.formulation, model_);
            e.ffc = blend.ffc;
            e.objective = -blend.ffc;
            const MaterialRecord* api = loading_ > 0.0 ? &model_.library.at(api_) : nullptr;
            x.row(static_cast<Eigen::Index>(i)) =
                surrogate::assemble_features(blend, api, loading_, genomes[i].pressure).transpose();
        }
        if (!genomes.empty()) {
            const auto p = predictor_(x);
            for (std::size_t i = 0; i < genomes.size(); ++i) {
                out[i].porosity = p.porosity[i];
                out[i].tensile_strength = p.tensile_strength[i];
                out[i].constraints = robust_constraints(p.tensile_strength[i], p.porosity[i], cfg_.constraints);
            }
        }
        evaluations_ += static_cast<long>(genomes.size());
        return out;
    }

    Evaluation evaluate(const Genome& g) { return evaluate(std::vector<Genome>{g}).front(); }

private:
    const mixture::MixtureModel& model_;
    Predictor predictor_;
    std::string api_;
    double loading_;
    FormulatorConfig cfg_;
    long evaluations_ = 0;
};

/// Constrained comparison: feasible beats infeasible, infeasible ones compare by
/// total violation, feasible ones by objective; exact ties fall back to the genome.
inline bool better(const Evaluation& a, const Evaluation& b) {
    const bool fa = a.constraints.feasible(), fb = b.constraints.feasible();
    if (fa != fb) return fa;
    if (!fa) {
        if (a.constraints.violation() != b.constraints.violation()) return a.constraints.violation() < b.constraints.violation();
    } else if (a.objective != b.objective) {
        return a.objective < b.objective;
    }
    return a.genome < b.genome;
}

namespace detail {

/// Constraint-domination for a single objective.
inline bool dominates(const Evaluation& a, const Evaluation& b) {
    const bool fa = a.constraints.feasible(), fb = b.constraints.feasible();
    if (fa && !fb) return true;
    if (!fa && fb) return false;
    if (!fa) return a.constraints.violation() < b.constraints.violation();
    return a.objective < b.objective;
}

inline std::vector<std::vector<std::size_t>> non_dominated_sort(const std::vector<Evaluation>& pop) {
    const std::size_t n = pop.size();
    std::vector<std::vector<std::size_t>> dominated(n), fronts(1);
    std::vector<int> count(n, 0);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = 0; q < n; ++q) {
            if (p == q) continue;
            if (dominates(pop[p], pop[q])) dominated[p].push_back(q);
            else if (dominates(pop[q], pop[p])) ++count[p];
        }
        if (count[p] == 0) fronts[0].push_back(p);
    }
    for (std::size_t f = 0; !fronts[f].empty(); ++f) {
        std::vector<std::size_t> next;
        for (std::size_t p : fronts[f])
            for (std::size_t q : dominated[p])
                if (--count[q] == 0) next.push_back(q);
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(next));
    }
    fronts.pop_back();
    return fronts;
}

/// Crowding distance in (objective, split, pressure) space; with one objective
/// the decision-space terms keep diversity among equal-objective members.
inline std::vector<double> crowding(const std::vector<Evaluation>& pop, const std::vector<std::size_t>& front,
                                    const FormulatorConfig& cfg) {
    std::vector<double> d(front.size(), 0.0);
    if (front.size() <= 2) {
        std::fill(d.begin(), d.end(), std::numeric_limits<double>::infinity());
        return d;
    }
    const std::vector<std::function<double(const Evaluation&)>> axes{
        [](const Evaluation& e) { return e.objective; },
        [](const Evaluation& e) { return e.genome.split; },
        [&](const Evaluation& e) { return (e.genome.pressure - cfg.min_pressure) / (cfg.max_pressure - cfg.min_pressure); }};
    std::vector<std::size_t> idx(front.size());
    for (const auto& axis : axes) {
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return axis(pop[front[a]]) < axis(pop[front[b]]); });
        const double lo = axis(pop[front[idx.front()]]), hi = axis(pop[front[idx.back()]]);
        d[idx.front()] = d[idx.back()] = std::numeric_limits<double>::infinity();
        if (!(hi > lo)) continue;
        for (std::size_t k = 1; k + 1 < idx.size(); ++k)
            d[idx[k]] += (axis(pop[front[idx[k + 1]]]) - axis(pop[front[idx[k - 1]]])) / (hi - lo);
    }
    return d;
}

inline double snap(double v, double lo, double hi, std::optional<double> step) {
    v = std::clamp(v, lo, hi);
    if (!step || !(*step > 0.0)) return v;
    const double k = std::round((v - lo) / *step);
    return std::min(hi, lo + k * *step);
}

inline void polynomial_mutation(double& y, double lo, double hi, double eta, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double span = hi - lo;
    const double d1 = (y - lo) / span, d2 = (hi - y) / span;
    const double r = u(rng);
    const double power = 1.0 / (eta + 1.0);
    double dq;
    if (r < 0.5) {
        const double v = 2.0 * r + (1.0 - 2.0 * r) * std::pow(1.0 - d1, eta + 1.0);
        dq = std::pow(v, power) - 1.0;
    } else {
        const double v = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * std::pow(1.0 - d2, eta + 1.0);
        dq = 1.0 - std::pow(v, power);
    }
    y = std::clamp(y + dq * span, lo, hi);
}

/// Bounded simulated binary crossover of one variable pair.
inline void sbx(double& a, double& b, double lo, double hi, double eta, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) > 0.5 || std::abs(a - b) < 1e-14) return;
    const double y1 = std::min(a, b), y2 = std::max(a, b);
    const double span = y2 - y1;
    auto child = [&](double beta_edge, double r, double sign) {
        const double alpha = 2.0 - std::pow(beta_edge, -(eta + 1.0));
        const double betaq = r <= 1.0 / alpha ? std::pow(r * alpha, 1.0 / (eta + 1.0))
                                              : std::pow(1.0 / (2.0 - r * alpha), 1.0 / (eta + 1.0));
        return 0.5 * ((y1 + y2) + sign * betaq * span);
    };
    const double r = u(rng);
    double c1 = child(1.0 + 2.0 * (y1 - lo) / span, r, -1.0);
    double c2 = child(1.0 + 2.0 * (hi - y2) / span, r, 1.0);
    c1 = std::clamp(c1, lo, hi);
    c2 = std::clamp(c2, lo, hi);
    if (u(rng) < 0.5) std::swap(c1, c2);
    a = c1;
    b = c2;
}

}  // namespace detail

struct Nsga2Result {
    std::vector<Evaluation> solutions;  // non-dominated, sorted by objective then genome
    bool feasible = false;
    long evaluations = 0;

    const Evaluation& best() const { return solutions.front(); }
};

inline Genome random_genome(const FormulatorConfig& cfg, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(cfg.excipients.size()) - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Genome g;
    g.excipient1 = pick(rng);
    g.excipient2 = pick(rng);
    g.split = detail::snap(u(rng), 0.0, 1.0, cfg.split_step);
    g.pressure = detail::snap(cfg.min_pressure + u(rng) * (cfg.max_pressure - cfg.min_pressure), cfg.min_pressure,
                              cfg.max_pressure, cfg.pressure_step);
    return g;
}

inline Nsga2Result run_nsga2(Evaluator& ev, std::uint64_t seed) {
    const auto& cfg = ev.config();
    if (cfg.population < 2) throw Error(ErrorCode::InvalidBounds, "population must be >= 2");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> pick_exc(0, static_cast<int>(cfg.excipients.size()) - 1);
    const auto n = static_cast<std::size_t>(cfg.population);
    const long evals0 = ev.evaluations();

    std::vector<Genome> genomes;
    for (std::size_t i = 0; i < n; ++i) genomes.push_back(random_genome(cfg, rng));
    std::vector<Evaluation> pop = ev.evaluate(genomes);

    auto rank_population = [&](const std::vector<Evaluation>& p, std::vector<int>& rank, std::vector<double>& crowd) {
        rank.assign(p.size(), 0);
        crowd.assign(p.size(), 0.0);
        const auto fronts = detail::non_dominated_sort(p);
        for (std::size_t f = 0; f < fronts.size(); ++f) {
            const auto d = detail::crowding(p, fronts[f], cfg);
            for (std::size_t k = 0; k < fronts[f].size(); ++k) {
                rank[fronts[f][k]] = static_cast<int>(f);
                crowd[fronts[f][k]] = d[k];
            }
        }
        return fronts;
    };

    std::vector<int> rank;
    std::vector<double> crowd;
    rank_population(pop, rank, crowd);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    auto tournament = [&]() -> const Evaluation& {
        const std::size_t a = pick(rng), b = pick(rng);
        if (rank[a] != rank[b]) return pop[rank[a] < rank[b] ? a : b];
        if (crowd[a] != crowd[b]) return pop[crowd[a] > crowd[b] ? a : b];
        return pop[std::min(a, b)];
    };

    for (int gen = 0; gen < cfg.generations; ++gen) {
        std::vector<Genome> children;
        while (children.size() < n) {
            Genome c1 = tournament().genome, c2 = tournament().genome;
            if (u(rng) < cfg.crossover_probability) {
                if (u(rng) < 0.5) std::swap(c1.excipient1, c2.excipient1);
                if (u(rng) < 0.5) std::swap(c1.excipient2, c2.excipient2);
                detail::sbx(c1.split, c2.split, 0.0, 1.0, cfg.sbx_eta, rng);
                detail::sbx(c1.pressure, c2.pressure, cfg.min_pressure, cfg.max_pressure, cfg.sbx_eta, rng);
            }
            for (Genome* c : {&c1, &c2}) {
                if (u(rng) < cfg.categorical_mutation) c->excipient1 = pick_exc(rng);
                if (u(rng) < cfg.categorical_mutation) c->excipient2 = pick_exc(rng);
                if (u(rng) < cfg.mutation_probability) detail::polynomial_mutation(c->split, 0.0, 1.0, cfg.mutation_eta, rng);
                if (u(rng) < cfg.mutation_probability)
                    detail::polynomial_mutation(c->pressure, cfg.min_pressure, cfg.max_pressure, cfg.mutation_eta, rng);
                c->split = detail::snap(c->split, 0.0, 1.0, cfg.split_step);
                c->pressure = detail::snap(c->pressure, cfg.min_pressure, cfg.max_pressure, cfg.pressure_step);
            }
            children.push_back(c1);
            if (children.size() < n) children.push_back(c2);
        }
        auto offspring = ev.evaluate(children);
        std::vector<Evaluation> merged = pop;
        merged.insert(merged.end(), offspring.begin(), offspring.end());

        std::vector<int> mrank;
        std::vector<double> mcrowd;
        const auto fronts = rank_population(merged, mrank, mcrowd);
        std::vector<Evaluation> next;
        for (const auto& front : fronts) {
            if (next.size() + front.size() <= n) {
                for (std::size_t i : front) next.push_back(merged[i]);
                continue;
            }
            std::vector<std::size_t> order(front.begin(), front.end());
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mcrowd[a] > mcrowd[b]; });
            for (std::size_t k = 0; next.size() < n; ++k) next.push_back(merged[order[k]]);
            break;
        }
        pop = std::move(next);
        rank_population(pop, rank, crowd);
    }

    Nsga2Result r;
    r.evaluations = ev.evaluations() - evals0;
    const auto fronts = detail::non_dominated_sort(pop);
    for (std::size_t i : fronts.front()) r.solutions.push_back(pop[i]);
    std::sort(r.solutions.begin(), r.solutions.end(), better);
    r.solutions.erase(std::unique(r.solutions.begin(), r.solutions.end(),
                                  [](const Evaluation& a, const Evaluation& b) { return a.genome == b.genome; }),
                      r.solutions.end());
    r.feasible = r.solutions.front().constraints.feasible();
    if (!r.feasible) r.solutions.resize(1);
    return r;
}

/// Every genome of the discretized problem (split and pressure steps required).
inline std::vector<Genome> enumerate_grid(const FormulatorConfig& cfg) {
    if (!cfg.split_step || !cfg.pressure_step) throw Error(ErrorCode::InvalidBounds, "grid enumeration needs step sizes");
    std::vector<Genome> out;
    const int ns = static_cast<int>(std::round(1.0 / *cfg.split_step));
    const int np = static_cast<int>(std::floor((cfg.max_pressure - cfg.min_pressure) / *cfg.pressure_step + 1e-9));
    const int ne = static_cast<int>(cfg.excipients.size());
    for (int e1 = 0; e1 < ne; ++e1)
        for (int e2 = 0; e2 < ne; ++e2)
            for (int s = 0; s <= ns; ++s)
                for (int p = 0; p <= np; ++p)
                    out.push_back({e1, e2, detail::snap(s * *cfg.split_step, 0.0, 1.0, cfg.split_step),
                                   detail::snap(cfg.min_pressure + p * *cfg.pressure_step, cfg.min_pressure,
                                                cfg.max_pressure, cfg.pressure_step)});
    return out;
}

/// Exhaustive optimum over a genome list, evaluated in batches.
inline std::optional<Evaluation> brute_force(Evaluator& ev, const std::vector<Genome>& genomes,
                                             std::size_t batch = 4096) {
    std::optional<Evaluation> best;
    for (std::size_t start = 0; start < genomes.size(); start += batch) {
        const std::vector<Genome> chunk(genomes.begin() + static_cast<std::ptrdiff_t>(start),
                                        genomes.begin() + static_cast<std::ptrdiff_t>(std::min(genomes.size(), start + batch)));
        for (auto& e : ev.evaluate(chunk))
            if (e.constraints.feasible() && (!best || better(e, *best))) best = std::move(e);
    }
    return best;
}

inline std::string result_csv_header() {
    return "api,loading,excipient1,fraction1,excipient2,fraction2,disintegrant,disintegrant_fraction,lubricant,"
           "lubricant_fraction,pressure,ffc,porosity_mean,porosity_std,ts_mean,ts_std,g1,g2,feasible\n";
}

inline std::string result_csv_row(const Evaluation& e, const Evaluator& ev) {
    const auto& cfg = ev.config();
    const auto& e1 = cfg.excipients[static_cast<std::size_t>(e.genome.excipient1)];
    const auto& e2 = cfg.excipients[static_cast<std::size_t>(e.genome.excipient2)];
    const double f1 = e.formulation.fraction_of(e1);
    const double f2 = e1 == e2 ? 0.0 : e.formulation.fraction_of(e2);
    std::ostringstream out;
    out << ev.api() << ',' << io::fmt(ev.loading()) << ',' << e1 << ',' << io::fmt(f1) << ',' << e2 << ','
        << io::fmt(f2) << ',' << cfg.disintegrant << ',' << io::fmt(cfg.disintegrant_fraction) << ',' << cfg.lubricant
        << ',' << io::fmt(cfg.lubricant_fraction) << ',' << io::fmt(e.genome.pressure) << ',' << io::fmt(e.ffc) << ','
        << io::fmt(e.porosity.mean) << ',' << io::fmt(e.porosity.std) << ',' << io::fmt(e.tensile_strength.mean) << ','
        << io::fmt(e.tensile_strength.std) << ',' << io::fmt(e.constraints.g1) << ',' << io::fmt(e.constraints.g2) << ','
        << (e.constraints.feasible() ? "true" : "false") << '\n';
    return out.str();
}

}  // namespace tabletlab::formulator
