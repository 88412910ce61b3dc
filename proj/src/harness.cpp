#include "acekit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <thread>

#include "acekit/error.hpp"
#include "acekit/numkit/linalg.hpp"

namespace acekit {

using Eigen::Index;
using Eigen::VectorXd;

void to_json(nlohmann::json& j, const EstimatorSpec& s) {
    j = nlohmann::json{{"name", s.name},     {"method", s.method}, {"adjust", s.adjust},
                       {"ps", s.ps},         {"m", s.m},           {"k", s.k},
                       {"clip", s.clip}};
    j["covariates"] = s.covariates ? nlohmann::json(*s.covariates) : nlohmann::json(nullptr);
}

EstimatorSpec estimator_spec_from_json(const nlohmann::json& j) {
    try {
        EstimatorSpec s;
        s.method = j.at("method").get<std::string>();
        s.name = j.value("name", s.method);
        s.adjust = j.value("adjust", s.adjust);
        s.ps = j.value("ps", s.ps);
        s.m = j.value("m", s.m);
        s.k = j.value("k", s.k);
        s.clip = j.value("clip", s.clip);
        if (j.contains("covariates") && !j.at("covariates").is_null()) {
            s.covariates = j.at("covariates").get<std::vector<int>>();
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ConfigError, std::string("estimator spec: ") + e.what());
    }
}

namespace {

const NormalLinearModel* as_normal(const ScenarioModel* m) {
    return m ? std::get_if<NormalLinearModel>(m) : nullptr;
}

[[noreturn]] void needs_model(const std::string& token) {
    fail(ErrorKind::ConfigError, "'" + token + "' requires a generating model of suitable type");
}

double parse_value(const std::string& token, const std::string& prefix) {
    const std::string rest = token.substr(prefix.size());
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(rest, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != rest.size()) {
        fail(ErrorKind::ConfigError, "cannot read a number from '" + token + "'");
    }
    return v;
}

std::optional<std::vector<Index>> zero_based(const std::optional<std::vector<int>>& cols) {
    if (!cols) {
        return std::nullopt;
    }
    std::vector<Index> out;
    for (int c : *cols) {
        if (c < 1) {
            fail(ErrorKind::ConfigError, "covariate columns are 1-based");
        }
        out.push_back(c - 1);
    }
    return out;
}

OutcomeModel base_outcome(const std::string& token, const Dataset& data,
                          const ScenarioModel* population,
                          const std::optional<std::vector<int>>& covariates) {
    if (token == "zero") {
        return zero_outcome();
    }
    if (token.rfind("const:", 0) == 0) {
        return constant_outcome(parse_value(token, "const:"));
    }
    if (token == "joint") {
        return fit_outcome_joint(data, zero_based(covariates));
    }
    if (token == "per-arm") {
        return fit_outcome_per_arm(data, zero_based(covariates));
    }
    if (token == "known") {
        if (const auto* n = as_normal(population)) {
            return linear_outcome(n->d, n->b, n->d + n->delta, n->b);
        }
        if (const auto* a = population ? std::get_if<LogisticAssignmentModel>(population) : nullptr) {
            return known_outcome(*a);
        }
        if (const auto* b = population ? std::get_if<BinaryLogisticModel>(population) : nullptr) {
            const BinaryLogisticModel m = *b;
            return OutcomeModel(
                OutcomeProvenance::Known,
                [m](const VectorXd& x) { return numkit::expit(m.d + m.b.dot(x)); },
                [m](const VectorXd& x) { return numkit::expit(m.d + m.delta + m.b.dot(x)); });
        }
        needs_model(token);
    }
    fail(ErrorKind::ConfigError, "unknown outcome model '" + token + "'");
}

bool needs_ps(const std::string& m) { return m.rfind("optimal:", 0) == 0; }

}  // namespace

PropensityFunction resolve_ps(const std::string& token, const Dataset& data,
                              const ScenarioModel* population, bool clip) {
    auto finish = [clip](PropensityFunction f) {
        return clip && !f.clipping() ? f.with_clipping() : f;
    };
    if (token == "true") {
        if (const auto* n = as_normal(population)) {
            return finish(population_ps(*n));
        }
        if (const auto* a = population ? std::get_if<LogisticAssignmentModel>(population) : nullptr) {
            return finish(PropensityFunction::linear_score(ScoreKind::PS, a->c, a->a));
        }
        if (const auto* b = population ? std::get_if<BinaryLogisticModel>(population) : nullptr) {
            return finish(PropensityFunction::linear_score(ScoreKind::PS, b->c, b->a));
        }
        needs_model(token);
    }
    if (token == "logistic") {
        PsOptions options;
        options.clip = clip;
        return estimate_ps_logistic(data, options);
    }
    if (token == "ld" || token == "qd") {
        return finish(ps_from_moments(sample_moments(data), token == "qd"));
    }
    if (token == "marginal") {
        const double share =
            static_cast<double>(data.treated_count()) / static_cast<double>(data.n());
        return finish(PropensityFunction::constant_probability(share, ScoreKind::EstimatedPS));
    }
    if (token.rfind("const:", 0) == 0) {
        return finish(PropensityFunction::constant_probability(parse_value(token, "const:")));
    }
    fail(ErrorKind::ConfigError, "unknown propensity '" + token + "'");
}

PropensityFunction resolve_score(const std::string& token, const Dataset& data,
                                 const ScenarioModel* population) {
    if (token == "lp") {
        if (const auto* n = as_normal(population)) {
            return population_lp(*n);
        }
        if (const auto* a = population ? std::get_if<LogisticAssignmentModel>(population) : nullptr) {
            return PropensityFunction::linear_score(ScoreKind::LP, 0.0, a->b);
        }
        if (const auto* b = population ? std::get_if<BinaryLogisticModel>(population) : nullptr) {
            return PropensityFunction::linear_score(ScoreKind::LP, 0.0, b->b);
        }
        needs_model(token);
    }
    if (token == "ld" || token == "qd") {
        const auto* n = as_normal(population);
        if (!n) {
            needs_model(token);
        }
        return token == "ld" ? population_ld(*n) : population_qd(*n);
    }
    if (token == "ps") {
        return resolve_ps("true", data, population, false);
    }
    if (token == "ld*") {
        return sample_ld(data);
    }
    if (token == "qd*") {
        return sample_qd(data);
    }
    if (token == "ps*") {
        return estimate_ps_logistic(data);
    }
    fail(ErrorKind::ConfigError, "unknown score '" + token + "'");
}

OutcomeModel resolve_outcome(const std::string& token, const Dataset& data,
                             const ScenarioModel* population, const PropensityFunction* ps,
                             const std::optional<std::vector<int>>& covariates) {
    if (needs_ps(token)) {
        if (!ps) {
            fail(ErrorKind::ConfigError, "'" + token + "' needs a propensity");
        }
        const auto base = base_outcome(token.substr(8), data, population, covariates);
        return optimal_m(*ps, base.arm(1), base.arm(0));
    }
    if (token.rfind("m1-only:", 0) == 0) {
        const auto base = base_outcome(token.substr(8), data, population, covariates);
        return single_outcome(base.arm(1), base.provenance());
    }
    return base_outcome(token, data, population, covariates);
}

AceEstimate run_estimator(const EstimatorSpec& spec, const Dataset& data,
                          const ScenarioModel* population) {
    WeightOptions weights;
    weights.clip = spec.clip;
    const std::string& method = spec.method;
    if (method == "face") {
        return face(data);
    }
    if (method == "reg") {
        if (spec.adjust == "x") {
            const auto cols = zero_based(spec.covariates);
            return regression_adjusted_ace(data, cols ? Adjustment::covariate_subset(*cols)
                                                      : Adjustment::all_covariates(data.p()));
        }
        return regression_adjusted_ace(
            data, Adjustment::score(resolve_score(spec.adjust, data, population)));
    }
    if (method == "subclass") {
        if (spec.adjust == "x") {
            fail(ErrorKind::ConfigError, "subclassification needs a scalar score");
        }
        return subclassification_ace(data, resolve_score(spec.adjust, data, population), spec.k);
    }
    if (method == "ipw") {
        return ipw_ace(data, resolve_ps(spec.ps, data, population, spec.clip), weights);
    }
    if (method == "aipw") {
        const auto ps = resolve_ps(spec.ps, data, population, spec.clip);
        const auto m = resolve_outcome(spec.m, data, population, &ps, spec.covariates);
        return aipw_ace(data, ps, m, weights);
    }
    if (method == "outcome") {
        std::optional<PropensityFunction> ps;
        if (needs_ps(spec.m)) {
            ps = resolve_ps(spec.ps, data, population, spec.clip);
        }
        const auto m =
            resolve_outcome(spec.m, data, population, ps ? &*ps : nullptr, spec.covariates);
        return outcome_regression_ace(data, m);
    }
    if (method == "wresp") {
        return weighted_response_ace(data, resolve_ps(spec.ps, data, population, spec.clip),
                                     weights);
    }
    fail(ErrorKind::ConfigError, "unknown method '" + method + "'");
}

namespace {

EstimatorSpec make(std::string name, std::string method, std::string adjust = "x",
                   std::string ps = "logistic", std::string m = "zero") {
    EstimatorSpec s;
    s.name = std::move(name);
    s.method = std::move(method);
    s.adjust = std::move(adjust);
    s.ps = std::move(ps);
    s.m = std::move(m);
    return s;
}

}  // namespace

std::vector<EstimatorSpec> default_estimators(const Scenario& s) {
    if (const auto* n = std::get_if<NormalLinearModel>(&s.model)) {
        if (n->homoscedastic()) {
            return {make("reg_x", "reg", "x"), make("reg_ld_star", "reg", "ld*"),
                    make("reg_ld", "reg", "ld"), make("reg_lp", "reg", "lp")};
        }
        return {make("reg_lp", "reg", "lp"),          make("subclass_qd", "subclass", "qd"),
                make("reg_ld", "reg", "ld"),          make("reg_qd", "reg", "qd"),
                make("reg_x", "reg", "x"),            make("subclass_qd_star", "subclass", "qd*"),
                make("reg_ld_star", "reg", "ld*"),    make("reg_qd_star", "reg", "qd*")};
    }
    if (std::holds_alternative<LogisticAssignmentModel>(s.model)) {
        return {make("aipw_opt_joint", "aipw", "x", "true", "optimal:joint"),
                make("aipw_opt_per_arm", "aipw", "x", "true", "optimal:per-arm"),
                make("ht", "ipw", "x", "true"),
                make("wresp", "wresp", "x", "true"),
                make("aipw_m1_only", "aipw", "x", "true", "m1-only:per-arm"),
                make("ht_logistic", "ipw", "x", "logistic"),
                make("outcome_per_arm", "outcome", "x", "true", "per-arm")};
    }
    return {make("face", "face"), make("reg_x", "reg", "x"), make("ipw", "ipw", "x", "logistic"),
            make("aipw_per_arm", "aipw", "x", "logistic", "per-arm"),
            make("subclass_ps_star", "subclass", "ps*")};
}

void ExperimentPlan::validate() const {
    if (replicates < 1) {
        fail(ErrorKind::ConfigError, "replicate count must be at least 1");
    }
    if (n < 1) {
        fail(ErrorKind::ConfigError, "sample size must be at least 1");
    }
    if (workers < 1) {
        fail(ErrorKind::ConfigError, "worker count must be at least 1");
    }
    if (estimators.empty()) {
        fail(ErrorKind::ConfigError, "estimator list is empty");
    }
    std::vector<std::string> names;
    for (const auto& e : estimators) {
        if (e.name.empty()) {
            fail(ErrorKind::ConfigError, "estimator without a name");
        }
        if (std::find(names.begin(), names.end(), e.name) != names.end()) {
            fail(ErrorKind::ConfigError, "duplicate estimator name '" + e.name + "'");
        }
        names.push_back(e.name);
    }
    const auto& edges = scenario.histogram_edges;
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (!(edges[i] > edges[i - 1])) {
            fail(ErrorKind::ConfigError, "histogram edges must increase");
        }
    }
}

ExperimentPlan default_plan(const Scenario& s) {
    ExperimentPlan plan;
    plan.scenario = s;
    plan.replicates = s.replicates;
    plan.n = s.n;
    plan.estimators = default_estimators(s);
    return plan;
}

const EstimatorSummary& McSummary::at(const std::string& name) const {
    for (const auto& e : estimators) {
        if (e.name == name) {
            return e;
        }
    }
    fail(ErrorKind::ConfigError, "no estimator named '" + name + "'");
}

std::vector<int> histogram_counts(const std::vector<double>& values,
                                  const std::vector<double>& edges) {
    if (edges.size() < 2) {
        return {};
    }
    std::vector<int> counts(edges.size() - 1, 0);
    for (double v : values) {
        // Bins are right-closed, as in R's hist; the first bin also holds its left edge.
        auto it = std::lower_bound(edges.begin() + 1, edges.end(), v);
        auto bin = static_cast<std::size_t>(it - edges.begin()) - 1;
        counts[std::min(bin, counts.size() - 1)] += 1;
    }
    return counts;
}

namespace {

struct Slot {
    std::optional<double> estimate;
    std::string failure;
};

}  // namespace

McSummary run_experiment(const ExperimentPlan& plan) {
    plan.validate();
    const auto reps = static_cast<std::size_t>(plan.replicates);
    const std::size_t k = plan.estimators.size();
    std::vector<std::vector<Slot>> slots(reps, std::vector<Slot>(k));
    std::vector<long> redraws(reps, 0);
    std::atomic<std::size_t> next{0};

    auto work = [&]() {
        for (std::size_t r = next++; r < reps; r = next++) {
            numkit::SeededRng rng(plan.seed, r);
            std::optional<Dataset> data;
            std::string failure;
            try {
                data = generate(plan.scenario.model, plan.n, Regime::Observational, rng);
                redraws[r] = data->treatment_redraws;
            } catch (const Error& e) {
                failure = std::string(to_string(e.kind()));
            }
            for (std::size_t e = 0; e < k; ++e) {
                if (!data) {
                    slots[r][e].failure = failure;
                    continue;
                }
                try {
                    const auto est = run_estimator(plan.estimators[e], *data, &plan.scenario.model);
                    if (std::isfinite(est.estimate)) {
                        slots[r][e].estimate = est.estimate;
                    } else {
                        slots[r][e].failure = "NonFinite";
                    }
                } catch (const Error& ex) {
                    if (ex.kind() == ErrorKind::ConfigError) {
                        throw;
                    }
                    slots[r][e].failure = std::string(to_string(ex.kind()));
                }
            }
        }
    };

    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(plan.workers), reps);
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w]() {
                try {
                    work();
                } catch (...) {
                    errors[w] = std::current_exception();
                    next = reps;
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
        for (const auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }

    McSummary out;
    out.scenario = plan.scenario.name;
    out.true_ace = true_ace(plan.scenario.model);
    out.n = plan.n;
    out.replicates = plan.replicates;
    out.seed = plan.seed;
    out.histogram_edges = plan.scenario.histogram_edges;
    for (long r : redraws) {
        out.treatment_redraws += r;
    }
    for (std::size_t e = 0; e < k; ++e) {
        EstimatorSummary s;
        s.name = plan.estimators[e].name;
        s.method = plan.estimators[e].method;
        std::vector<double> ok;
        for (std::size_t r = 0; r < reps; ++r) {
            const auto& slot = slots[r][e];
            s.estimates.push_back(slot.estimate);
            if (slot.estimate) {
                ok.push_back(*slot.estimate);
            } else {
                ++s.failure_kinds[slot.failure];
            }
        }
        s.successes = static_cast<int>(ok.size());
        s.failures = plan.replicates - s.successes;
        if (!ok.empty()) {
            double sum = 0.0;
            for (double v : ok) {
                sum += v;
            }
            const double mean = sum / static_cast<double>(ok.size());
            double ss = 0.0;
            for (double v : ok) {
                ss += (v - mean) * (v - mean);
            }
            const double sd =
                ok.size() > 1 ? std::sqrt(ss / static_cast<double>(ok.size() - 1)) : 0.0;
            s.mean = mean;
            s.sd = sd;
            s.mse = sd * sd + (mean - out.true_ace) * (mean - out.true_ace);
        }
        s.histogram = histogram_counts(ok, out.histogram_edges);
        out.estimators.push_back(std::move(s));
    }
    return out;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string fixed4(const std::optional<double>& v) {
    if (!v) {
        return "NA";
    }
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << *v;
    std::string s = os.str();
    return s == "-0.0000" ? "0.0000" : s;
}

std::string safe_file_stem(const std::string& name) {
    std::string out = name;
    for (char& c : out) {
        const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
                          c == '.';
        if (!keep) {
            c = '_';
        }
    }
    return out;
}

}  // namespace

void to_json(nlohmann::json& j, const McSummary& s) {
    j = nlohmann::json::object();
    j["scenario"] = s.scenario;
    j["true_ace"] = s.true_ace;
    j["n"] = s.n;
    j["replicates"] = s.replicates;
    j["seed"] = s.seed;
    j["treatment_redraws"] = s.treatment_redraws;
    j["histogram_edges"] = s.histogram_edges;
    auto& list = j["estimators"] = nlohmann::json::array();
    for (const auto& e : s.estimators) {
        nlohmann::json item;
        item["name"] = e.name;
        item["method"] = e.method;
        item["mean"] = optional_json(e.mean);
        item["sd"] = optional_json(e.sd);
        item["mse"] = optional_json(e.mse);
        item["successes"] = e.successes;
        item["failures"] = e.failures;
        item["failure_kinds"] = e.failure_kinds;
        item["histogram"] = e.histogram;
        auto& est = item["estimates"] = nlohmann::json::array();
        for (const auto& v : e.estimates) {
            est.push_back(optional_json(v));
        }
        list.push_back(std::move(item));
    }
}

std::string summary_csv(const McSummary& summary) {
    std::ostringstream os;
    os << "estimator,method,mean,sd,mse,successes,failures\n";
    for (const auto& e : summary.estimators) {
        os << e.name << ',' << e.method << ',' << fixed4(e.mean) << ',' << fixed4(e.sd) << ','
           << fixed4(e.mse) << ',' << e.successes << ',' << e.failures << '\n';
    }
    return os.str();
}

void write_summary(const McSummary& summary, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        fail(ErrorKind::ConfigError, "cannot create '" + dir.string() + "': " + ec.message());
    }
    auto open = [](const std::filesystem::path& path) {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) {
            fail(ErrorKind::ConfigError, "cannot write '" + path.string() + "'");
        }
        return f;
    };
    {
        auto f = open(dir / "summary.json");
        f << nlohmann::json(summary).dump(2) << '\n';
    }
    {
        auto f = open(dir / "summary.csv");
        f << summary_csv(summary);
    }
    const auto& edges = summary.histogram_edges;
    for (const auto& e : summary.estimators) {
        auto f = open(dir / ("hist_" + safe_file_stem(e.name) + ".csv"));
        f << "bin_left,bin_right,count\n";
        for (std::size_t b = 0; b < e.histogram.size(); ++b) {
            f << std::setprecision(17) << edges[b] << ',' << edges[b + 1] << ',' << e.histogram[b]
              << '\n';
        }
    }
}

void to_json(nlohmann::json& j, const PsDensity& d) {
    j = nlohmann::json{{"grid", d.grid},
                       {"control", d.control},
                       {"treated", d.treated},
                       {"bandwidth", {{"control", d.bandwidth_control}, {"treated", d.bandwidth_treated}}},
                       {"n", {{"control", d.n_control}, {"treated", d.n_treated}}}};
}

double silverman_bandwidth(std::vector<double> values) {
    const auto n = values.size();
    if (n < 2) {
        return 1e-3;
    }
    std::sort(values.begin(), values.end());
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    auto quantile = [&](double q) {
        const double h = q * static_cast<double>(n - 1);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const auto hi = std::min(lo + 1, n - 1);
        return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    const double iqr = quantile(0.75) - quantile(0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0.0)) {
        spread = sd;
    }
    if (!(spread > 0.0)) {
        return 1e-3;
    }
    return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

PsDensity ps_density(const VectorXd& ps, const VectorXd& t, int grid_points) {
    if (ps.size() != t.size()) {
        fail(ErrorKind::DimensionMismatch, "ps_density: scores and treatment differ in length");
    }
    if (grid_points < 2) {
        fail(ErrorKind::ConfigError, "ps_density: need at least two grid points");
    }
    std::vector<double> arm[2];
    for (Index i = 0; i < ps.size(); ++i) {
        arm[t(i) == 1.0 ? 1 : 0].push_back(ps(i));
    }
    PsDensity d;
    for (int g = 0; g < grid_points; ++g) {
        d.grid.push_back(static_cast<double>(g) / static_cast<double>(grid_points - 1));
    }
    auto kde = [&](const std::vector<double>& values, double h) {
        std::vector<double> out(d.grid.size(), 0.0);
        if (values.empty()) {
            return out;
        }
        const double norm =
            1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * std::numbers::pi));
        for (std::size_t g = 0; g < d.grid.size(); ++g) {
            double s = 0.0;
            for (double v : values) {
                const double z = (d.grid[g] - v) / h;
                s += std::exp(-0.5 * z * z);
            }
            out[g] = s * norm;
        }
        return out;
    };
    d.bandwidth_control = silverman_bandwidth(arm[0]);
    d.bandwidth_treated = silverman_bandwidth(arm[1]);
    d.control = kde(arm[0], d.bandwidth_control);
    d.treated = kde(arm[1], d.bandwidth_treated);
    d.n_control = static_cast<Index>(arm[0].size());
    d.n_treated = static_cast<Index>(arm[1].size());
    return d;
}

}  // namespace acekit
