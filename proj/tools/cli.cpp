#include "cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "tsdid/csv.hpp"
#include "tsdid/dgp.hpp"
#include "tsdid/error.hpp"

namespace tsdid::cli {
namespace {

constexpr double kZ95 = 1.959963984540054;

using json = nlohmann::json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataOptions {
    std::string path;
    std::string y;
    std::string unit;
    std::string time;
    std::string group;
    std::string cluster;
    std::string weight;
    std::vector<std::string> covariates;
    std::string delimiter = ",";
    std::optional<double> never_value;
    int anticipation = 0;
};

struct ModelOptions {
    bool event_study = false;
    std::vector<std::string> refs;
    std::vector<int> horizon;
    std::string first_stage = "unit";
    double tol = 1e-8;
    int max_iter = 10'000;
};

struct InferenceOptions {
    bool bootstrap = false;
    int n_bootstraps = 250;
    std::uint64_t seed = 0;
    int threads = 0;
    bool cluster_correction = false;
};

struct OutputOptions {
    std::string out;
    std::string plot_data;
    std::string format;
};

struct SimulateOptions {
    DgpConfig config;
    std::vector<std::string> groups;
    std::string out;
};

void add_data_options(CLI::App* cmd, DataOptions& o) {
    cmd->add_option("--data", o.path, "Panel CSV file")->required();
    cmd->add_option("--y", o.y, "Outcome column")->required();
    cmd->add_option("--unit", o.unit, "Unit identifier column")->required();
    cmd->add_option("--time", o.time, "Integer period column")->required();
    cmd->add_option("--group", o.group, "First treated period column (inf or empty: never)")->required();
    cmd->add_option("--cluster", o.cluster, "Cluster column (default: unit)");
    cmd->add_option("--weight", o.weight, "Observation weight column");
    cmd->add_option("--delimiter", o.delimiter, "Field delimiter")->capture_default_str();
    cmd->add_option("--never-value", o.never_value, "Numeric group value meaning never treated (e.g. 0)");
    cmd->add_option("--anticipation", o.anticipation, "Periods of anticipation")->capture_default_str();
}

void add_model_options(CLI::App* cmd, ModelOptions& o, bool with_first_stage) {
    cmd->add_flag("--event-study", o.event_study, "Estimate event-time effects instead of one static effect");
    cmd->add_option("--ref", o.refs, "Reference event time, repeatable (default: -1 and inf)");
    cmd->add_option("--horizon", o.horizon, "Report event times MIN..MAX only")->expected(2);
    if (with_first_stage) {
        cmd->add_option("--first-stage", o.first_stage, "Fixed effects of the first stage")
            ->check(CLI::IsMember({"unit", "group"}))
            ->capture_default_str();
    }
    cmd->add_option("--tol", o.tol, "Alternating-projection tolerance")->capture_default_str();
    cmd->add_option("--max-iter", o.max_iter, "Alternating-projection sweep limit")->capture_default_str();
}

void add_covariate_option(CLI::App* cmd, DataOptions& o) {
    cmd->add_option("--covariate", o.covariates, "First-stage covariate column, repeatable");
}

void add_inference_options(CLI::App* cmd, InferenceOptions& o) {
    cmd->add_flag("--bootstrap", o.bootstrap, "Cluster bootstrap instead of the analytic variance");
    cmd->add_option("--n-bootstraps", o.n_bootstraps, "Bootstrap replicates")->capture_default_str();
    cmd->add_option("--seed", o.seed, "Bootstrap seed")->capture_default_str();
    cmd->add_option("--threads", o.threads, "Worker threads (0: all cores)")->capture_default_str();
    cmd->add_flag("--cluster-correction", o.cluster_correction, "Scale the analytic variance by G/(G-1)");
}

void add_output_options(CLI::App* cmd, OutputOptions& o, bool plot) {
    cmd->add_option("--out", o.out, "Output file (default: stdout)");
    cmd->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    if (plot) cmd->add_option("--plot-data", o.plot_data, "Also write plot data CSV to this file");
}

std::string format_or(const OutputOptions& o, const char* fallback) {
    return o.format.empty() ? std::string(fallback) : o.format;
}

PanelDataset load(const DataOptions& o, const std::vector<std::string>& covariates) {
    if (o.delimiter.size() != 1) throw UsageError("--delimiter must be a single character");
    if (o.anticipation < 0) throw UsageError("--anticipation must be non-negative");
    ColumnSpec spec;
    spec.unit = o.unit;
    spec.time = o.time;
    spec.outcome = o.y;
    spec.group = o.group;
    if (!o.cluster.empty()) spec.cluster = o.cluster;
    if (!o.weight.empty()) spec.weight = o.weight;
    spec.covariates = covariates;
    spec.delimiter = o.delimiter.front();
    spec.never_sentinel = o.never_value;
    PanelDataset data = load_csv(o.path, spec);
    if (o.anticipation > 0) data = derive_event_time(data, o.anticipation);
    return data;
}

SecondStageSpec second_stage_of(const ModelOptions& o) {
    SecondStageSpec spec;
    if (o.event_study) {
        spec.kind = SecondStageKind::EventStudy;
        if (!o.refs.empty()) {
            spec.reference_levels.clear();
            for (const auto& text : o.refs) {
                const auto k = RelTime::parse(text);
                if (!k) throw UsageError("--ref '" + text + "' is not an integer or inf");
                spec.reference_levels.insert(*k);
            }
        }
    } else if (!o.refs.empty()) {
        throw UsageError("--ref requires --event-study");
    }
    if (!o.horizon.empty()) {
        if (!o.event_study) throw UsageError("--horizon requires --event-study");
        if (o.horizon[0] > o.horizon[1]) throw UsageError("--horizon MIN must not exceed MAX");
        spec.horizon = std::pair{o.horizon[0], o.horizon[1]};
    }
    return spec;
}

FirstStageSpec first_stage_of(const ModelOptions& o, const DataOptions& d) {
    if (!(o.tol > 0.0)) throw UsageError("--tol must be positive");
    if (o.max_iter < 1) throw UsageError("--max-iter must be positive");
    FirstStageSpec spec;
    spec.effects = o.first_stage == "group" ? FixedEffectsKind::Group : FixedEffectsKind::Unit;
    spec.covariates = d.covariates;
    spec.solver = FeOptions{o.tol, o.max_iter};
    return spec;
}

InferenceSpec inference_of(const InferenceOptions& o) {
    if (o.bootstrap && o.n_bootstraps < 2) throw UsageError("--n-bootstraps must be at least 2");
    if (o.threads < 0) throw UsageError("--threads must be non-negative");
    InferenceSpec spec;
    spec.method = o.bootstrap ? InferenceMethod::Bootstrap : InferenceMethod::Gmm;
    spec.n_bootstraps = o.n_bootstraps;
    spec.seed = o.seed;
    spec.threads = o.threads;
    spec.cluster_correction = o.cluster_correction;
    return spec;
}

// Writes through `fallback` unless a path is given.
template <class Fn>
void emit(const std::string& path, std::ostream& fallback, Fn&& write) {
    if (path.empty()) {
        write(fallback);
        return;
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path + "'");
    write(file);
    file.flush();
    if (!file) throw Error(ErrorCode::InvalidArgument, "failed writing '" + path + "'");
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_of(const json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

std::string csv_number(double v) { return std::isfinite(v) ? format_double(v) : std::string("NA"); }

void write_result_csv(std::ostream& out, const EstimateResult& r) {
    out << "term,estimate,std.error,t_value,ci_low,ci_high\n";
    for (std::size_t j = 0; j < r.terms.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const double est = r.point[jj];
        const double se = r.se[jj];
        out << r.terms[j].label() << ',' << csv_number(est) << ',' << csv_number(se) << ',' << csv_number(est / se) << ','
            << csv_number(est - kZ95 * se) << ',' << csv_number(est + kZ95 * se) << '\n';
    }
}

void write_result(const OutputOptions& o, std::ostream& out, const EstimateResult& r) {
    const std::string format = format_or(o, "json");
    emit(o.out, out, [&](std::ostream& s) {
        if (format == "json") {
            s << result_to_json(r).dump(2) << '\n';
        } else {
            write_result_csv(s, r);
        }
    });
    if (!o.plot_data.empty()) {
        emit(o.plot_data, out, [&](std::ostream& s) { write_plot_data(s, {r}); });
    }
}

int estimate_cmd(const DataOptions& d, const ModelOptions& m, const InferenceOptions& i, const OutputOptions& o,
                 std::ostream& out) {
    const FirstStageSpec fs = first_stage_of(m, d);
    const SecondStageSpec ss = second_stage_of(m);
    const InferenceSpec inf = inference_of(i);
    const PanelDataset data = load(d, d.covariates);
    write_result(o, out, estimate_two_stage(data, fs, ss, inf));
    return kSuccess;
}

int twfe_cmd(const DataOptions& d, const ModelOptions& m, const OutputOptions& o, std::ostream& out) {
    const SecondStageSpec ss = second_stage_of(m);
    if (!(m.tol > 0.0) || m.max_iter < 1) throw UsageError("--tol and --max-iter must be positive");
    const PanelDataset data = load(d, {});
    write_result(o, out, estimate_twfe_naive(data, ss, FeOptions{m.tol, m.max_iter}));
    return kSuccess;
}

int weights_cmd(const DataOptions& d, const ModelOptions& m, const OutputOptions& o, std::ostream& out) {
    if (!(m.tol > 0.0) || m.max_iter < 1) throw UsageError("--tol and --max-iter must be positive");
    const PanelDataset data = load(d, {});
    const WeightDecomposition w = compute_twfe_weights(data, FeOptions{m.tol, m.max_iter});
    const std::string format = format_or(o, "json");
    emit(o.out, out, [&](std::ostream& s) {
        if (format == "json") {
            s << weights_to_json(w).dump(2) << '\n';
            return;
        }
        s << "g,t,n_gt,w,negative\n";
        for (const auto& c : w.cells) {
            s << c.group << ',' << c.period << ',' << c.n_rows << ',' << format_double(c.weight) << ','
              << (c.weight < 0.0 ? "true" : "false") << '\n';
        }
    });
    return kSuccess;
}

int compare_cmd(const DataOptions& d, const ModelOptions& m, const InferenceOptions& i, const OutputOptions& o,
                std::ostream& out) {
    const FirstStageSpec fs = first_stage_of(m, d);
    const SecondStageSpec ss = second_stage_of(m);
    const InferenceSpec inf = inference_of(i);
    const PanelDataset data = load(d, d.covariates);
    std::vector<EstimateResult> results;
    results.push_back(estimate_two_stage(data, fs, ss, inf));
    results.push_back(estimate_twfe_naive(data, ss, FeOptions{std::min(m.tol, 1e-12), m.max_iter}));
    results.push_back(estimate_imputation(data, fs, ss));
    const std::string format = format_or(o, "csv");
    emit(o.out, out, [&](std::ostream& s) {
        if (format == "csv") {
            write_compare_table(s, results);
            return;
        }
        json doc = {{"schema_version", kSchemaVersion}, {"results", json::array()}};
        for (const auto& r : results) doc["results"].push_back(result_to_json(r));
        s << doc.dump(2) << '\n';
    });
    if (!o.plot_data.empty()) emit(o.plot_data, out, [&](std::ostream& s) { write_plot_data(s, results); });
    return kSuccess;
}

GroupConfig parse_group(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() < 4 || parts.size() > 5) {
        throw UsageError("--group expects G:SHARE:BASE:SLOPE[:MEAN], got '" + text + "'");
    }
    GroupConfig g;
    try {
        const auto never = RelTime::parse(parts[0]);
        if (!never) throw UsageError("bad first period '" + parts[0] + "'");
        if (!never->is_never()) g.first_period = *never->k();
        std::size_t used = 0;
        auto num = [&](const std::string& s) {
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        };
        g.share = num(parts[1]);
        g.base_effect = num(parts[2]);
        g.slope = num(parts[3]);
        if (parts.size() == 5) g.unit_fe_mean = num(parts[4]);
    } catch (const std::logic_error&) {
        throw UsageError("--group '" + text + "' has a non-numeric field");
    }
    return g;
}

int simulate_cmd(SimulateOptions& s, std::ostream& out) {
    if (!s.groups.empty()) {
        s.config.groups.clear();
        for (const auto& text : s.groups) s.config.groups.push_back(parse_group(text));
    }
    const SimulatedPanel panel = simulate(s.config);
    emit(s.out, out, [&](std::ostream& f) { write_simulated_csv(f, panel); });
    if (!s.out.empty()) {
        out << "rows " << panel.data.n_rows() << '\n';
        out << "tau_overall " << format_double(panel.truth.tau_overall) << '\n';
        out << "k,tau_k\n";
        for (const auto& [k, v] : panel.truth.tau_k) out << k << ',' << format_double(v) << '\n';
    }
    return kSuccess;
}

void print_error(std::ostream& err, std::string_view code, const std::string& message) {
    err << json{{"error", code}, {"message", message}}.dump() << '\n';
}

}  // namespace

json result_to_json(const EstimateResult& r) {
    json terms = json::array();
    for (std::size_t j = 0; j < r.terms.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const double est = r.point[jj];
        const double se = r.se[jj];
        terms.push_back({{"term", r.terms[j].label()},
                         {"estimate", number(est)},
                         {"std_error", number(se)},
                         {"t_value", number(est / se)},
                         {"ci_low", number(est - kZ95 * se)},
                         {"ci_high", number(est + kZ95 * se)}});
    }
    json vcov = json::array();
    for (Eigen::Index a = 0; a < r.vcov.rows(); ++a) {
        json row = json::array();
        for (Eigen::Index b = 0; b < r.vcov.cols(); ++b) row.push_back(number(r.vcov(a, b)));
        vcov.push_back(std::move(row));
    }
    json doc = {
        {"schema_version", kSchemaVersion},
        {"estimator", r.estimator},
        {"kind", r.kind == SecondStageKind::Static ? "static" : "event_study"},
        {"n_obs", r.n_obs},
        {"n_clusters", r.n_clusters},
        {"terms", std::move(terms)},
        {"vcov", std::move(vcov)},
    };
    if (!r.method) {
        doc["method"] = nullptr;
    } else if (*r.method == InferenceMethod::Gmm) {
        doc["method"] = "gmm";
    } else {
        doc["method"] = "bootstrap";
        doc["n_bootstraps"] = r.n_bootstraps;
        doc["seed"] = r.seed;
        doc["n_failed_replicates"] = r.n_failed_replicates;
    }
    if (r.first_stage) {
        doc["convergence"] = {{"iterations", r.first_stage->iterations},
                              {"converged", r.first_stage->converged},
                              {"max_abs_update", r.first_stage->max_abs_update}};
    } else {
        doc["convergence"] = nullptr;
    }
    return doc;
}

EstimateResult result_from_json(const json& doc) {
    try {
        if (doc.at("schema_version").get<int>() != kSchemaVersion) {
            throw Error(ErrorCode::Parse, "unsupported schema_version " + doc.at("schema_version").dump());
        }
        EstimateResult r;
        r.estimator = doc.at("estimator").get<std::string>();
        const auto kind = doc.at("kind").get<std::string>();
        if (kind != "static" && kind != "event_study") throw Error(ErrorCode::Parse, "unknown kind '" + kind + "'");
        r.kind = kind == "static" ? SecondStageKind::Static : SecondStageKind::EventStudy;
        r.n_obs = doc.at("n_obs").get<std::size_t>();
        r.n_clusters = doc.at("n_clusters").get<std::size_t>();
        const json& terms = doc.at("terms");
        r.point.resize(static_cast<Eigen::Index>(terms.size()));
        r.se.resize(static_cast<Eigen::Index>(terms.size()));
        for (std::size_t j = 0; j < terms.size(); ++j) {
            const auto label = terms[j].at("term").get<std::string>();
            const auto term = Term::parse(label);
            if (!term) throw Error(ErrorCode::Parse, "bad term label '" + label + "'");
            r.terms.push_back(*term);
            r.point[static_cast<Eigen::Index>(j)] = number_of(terms[j].at("estimate"));
            r.se[static_cast<Eigen::Index>(j)] = number_of(terms[j].at("std_error"));
        }
        const json& vcov = doc.at("vcov");
        r.vcov.resize(static_cast<Eigen::Index>(vcov.size()), static_cast<Eigen::Index>(vcov.size()));
        for (std::size_t a = 0; a < vcov.size(); ++a) {
            if (vcov[a].size() != vcov.size()) throw Error(ErrorCode::Parse, "vcov is not square");
            for (std::size_t b = 0; b < vcov.size(); ++b) {
                r.vcov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = number_of(vcov[a][b]);
            }
        }
        const json& method = doc.at("method");
        if (!method.is_null()) {
            const auto m = method.get<std::string>();
            if (m == "gmm") {
                r.method = InferenceMethod::Gmm;
            } else if (m == "bootstrap") {
                r.method = InferenceMethod::Bootstrap;
                r.n_bootstraps = doc.at("n_bootstraps").get<int>();
                r.seed = doc.at("seed").get<std::uint64_t>();
                r.n_failed_replicates = doc.at("n_failed_replicates").get<int>();
            } else {
                throw Error(ErrorCode::Parse, "unknown method '" + m + "'");
            }
        }
        const json& conv = doc.at("convergence");
        if (!conv.is_null()) {
            r.first_stage = ConvergenceInfo{conv.at("iterations").get<int>(), conv.at("converged").get<bool>(),
                                            number_of(conv.at("max_abs_update"))};
        }
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("malformed result document: ") + e.what());
    }
}

json weights_to_json(const WeightDecomposition& w) {
    json cells = json::array();
    for (const auto& c : w.cells) {
        cells.push_back({{"g", c.group}, {"t", c.period}, {"n_gt", c.n_rows}, {"w", c.weight}, {"negative", c.weight < 0.0}});
    }
    return {{"schema_version", kSchemaVersion},
            {"cells", std::move(cells)},
            {"sum_w", w.sum_weights},
            {"n_negative", w.n_negative}};
}

void write_plot_data(std::ostream& out, const std::vector<EstimateResult>& results) {
    out << "term,estimate,ci_low,ci_high,estimator\n";
    for (const auto& r : results) {
        for (std::size_t j = 0; j < r.terms.size(); ++j) {
            const double est = r.point[static_cast<Eigen::Index>(j)];
            const double se = r.se[static_cast<Eigen::Index>(j)];
            out << r.terms[j].label() << ',' << csv_number(est) << ',' << csv_number(est - kZ95 * se) << ','
                << csv_number(est + kZ95 * se) << ',' << r.estimator << '\n';
        }
    }
}

void write_compare_table(std::ostream& out, const std::vector<EstimateResult>& results) {
    out << "estimator,term,estimate,std.error\n";
    for (const auto& r : results) {
        for (std::size_t j = 0; j < r.terms.size(); ++j) {
            out << r.estimator << ',' << r.terms[j].label() << ',' << csv_number(r.point[static_cast<Eigen::Index>(j)])
                << ',' << csv_number(r.se[static_cast<Eigen::Index>(j)]) << '\n';
        }
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Two-stage difference-in-differences for staggered adoption panels", "tsdid"};
    app.require_subcommand(1, 1);

    DataOptions data;
    ModelOptions model;
    ModelOptions twfe_model;
    twfe_model.tol = 1e-12;
    InferenceOptions inference;
    OutputOptions output;
    SimulateOptions sim;

    auto* estimate = app.add_subcommand("estimate", "Two-stage estimate with corrected standard errors");
    add_data_options(estimate, data);
    add_covariate_option(estimate, data);
    add_model_options(estimate, model, true);
    add_inference_options(estimate, inference);
    add_output_options(estimate, output, true);

    auto* twfe = app.add_subcommand("twfe", "Naive two-way fixed-effects estimate");
    add_data_options(twfe, data);
    add_model_options(twfe, twfe_model, false);
    add_output_options(twfe, output, true);

    auto* weights = app.add_subcommand("weights", "Implicit cell weights of the static TWFE estimate");
    add_data_options(weights, data);
    weights->add_option("--tol", twfe_model.tol, "Demeaning tolerance")->capture_default_str();
    weights->add_option("--max-iter", twfe_model.max_iter, "Demeaning sweep limit")->capture_default_str();
    add_output_options(weights, output, false);

    auto* compare = app.add_subcommand("compare", "Two-stage, naive TWFE and imputation estimates side by side");
    add_data_options(compare, data);
    add_covariate_option(compare, data);
    add_model_options(compare, model, true);
    add_inference_options(compare, inference);
    add_output_options(compare, output, true);

    auto* simulate_app = app.add_subcommand("simulate", "Generate a staggered-adoption panel with known effects");
    simulate_app->add_option("--units", sim.config.n_units, "Number of units")->capture_default_str();
    simulate_app->add_option("--start", sim.config.start, "First period")->capture_default_str();
    simulate_app->add_option("--end", sim.config.end, "Last period")->capture_default_str();
    simulate_app->add_option("--seed", sim.config.seed, "Random seed")->capture_default_str();
    simulate_app->add_option("--noise-sd", sim.config.noise_sd, "Idiosyncratic noise sd")->capture_default_str();
    simulate_app->add_option("--unit-fe-sd", sim.config.unit_fe_sd, "Unit effect sd")->capture_default_str();
    simulate_app->add_option("--time-fe-slope", sim.config.time_fe_slope, "Period effect slope")->capture_default_str();
    simulate_app->add_option("--group", sim.groups, "Group G:SHARE:BASE:SLOPE[:MEAN], repeatable; G may be inf");
    simulate_app->add_option("--out", sim.out, "Output CSV (default: stdout, no summary)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        print_error(err, error_code_name(ErrorCode::Parse), e.what());
        return kUsageError;
    }

    try {
        if (estimate->parsed()) return estimate_cmd(data, model, inference, output, out);
        if (twfe->parsed()) return twfe_cmd(data, twfe_model, output, out);
        if (weights->parsed()) return weights_cmd(data, twfe_model, output, out);
        if (compare->parsed()) return compare_cmd(data, model, inference, output, out);
        return simulate_cmd(sim, out);
    } catch (const UsageError& e) {
        print_error(err, error_code_name(ErrorCode::Parse), e.what());
        return kUsageError;
    } catch (const Error& e) {
        print_error(err, error_code_name(e.code()), e.what());
        return is_data_error(e.code()) ? kDataError : kEstimationError;
    } catch (const std::exception& e) {
        print_error(err, "E_INTERNAL", e.what());
        return kEstimationError;
    }
}

}  // namespace tsdid::cli
