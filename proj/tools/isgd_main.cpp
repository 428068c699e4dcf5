// isgd: implicit stochastic gradient descent toolkit.
//
// Subcommands: gen (simulate datasets), fit (run one estimation),
// asymp (closed-form asymptotics), experiment (replication studies).
//
// Exit codes: 0 success, 1 usage error, 2 divergence (result still
// written), 3 invalid asymptotic region, 4 experiment threshold unmet.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "isgd/asymptotics.hpp"
#include "isgd/cox_model.hpp"
#include "isgd/csv.hpp"
#include "isgd/experiments.hpp"
#include "isgd/parallel.hpp"
#include "isgd/sgd_engine.hpp"
#include "isgd/simlab.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t hash = 0xcbf29ce484222325ULL) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string content_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot hash missing file: " + path);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buffer[1 << 16];
    while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0)
        hash = fnv1a64(buffer, static_cast<std::size_t>(in.gcount()), hash);
    char hex[32];
    std::snprintf(hex, sizeof(hex), "fnv1a64:%016llx", static_cast<unsigned long long>(hash));
    return hex;
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    char buffer[32];
    std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buffer;
}

void write_manifest(const std::string& path, const std::string& command, const json& config,
                    std::uint64_t seed, const std::map<std::string, std::string>& inputs) {
    json manifest = {{"command", command},
                     {"config", config},
                     {"seed", seed},
                     {"inputs", inputs},
                     {"created", utc_timestamp()}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << manifest.dump(2) << "\n";
}

/// Seed precedence: CLI flag > config file > ISGD_SEED env.
std::optional<std::uint64_t> fallback_seed() {
    if (const char* env = std::getenv("ISGD_SEED")) return std::stoull(env);
    return std::nullopt;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::map<std::string, std::string> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key=value");
        entries[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return entries;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> values;
    std::istringstream stream(text);
    std::string field;
    while (std::getline(stream, field, ',')) values.push_back(std::stod(field));
    return values;
}

isgd::Vector to_vector(const std::vector<double>& values) {
    isgd::Vector v(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) v(static_cast<Eigen::Index>(i)) = values[i];
    return v;
}

json matrix_to_json(const isgd::Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenArgs {
    std::string design;
    long n = 1000;
    int p = 20;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out = "dataset.csv";
    double eig_lo = 0.5, eig_hi = 5.0;
    std::string theta;
    double censor_quantile = 0.8, min_censor_prob = 0.001;
    double contamination = 0.05, outlier = 10.0;
};

int run_gen(const GenArgs& args) {
    std::uint64_t seed = args.seed;
    if (!args.seed_given) {
        const auto env = fallback_seed();
        if (!env) {
            std::fprintf(stderr, "gen: --seed is required (or set ISGD_SEED)\n");
            return 1;
        }
        seed = *env;
    }
    isgd::Rng rng(seed);
    json config = {{"design", args.design}, {"n", args.n}, {"p", args.p}, {"out", args.out}};

    if (args.design == "normal_linear") {
        isgd::Rng meta = isgd::Rng::substream(seed, 1000000007ULL);
        isgd::NormalLinearSpec spec;
        spec.eigenvalues = isgd::draw_diagonal_eigenvalues(args.p, args.eig_lo, args.eig_hi, meta);
        spec.theta_star = args.theta.empty() ? isgd::Vector::Ones(args.p)
                                             : to_vector(parse_double_list(args.theta));
        isgd::write_dataset_csv(args.out, isgd::gen_normal_linear(spec, args.n, rng));
        config["eig_lo"] = args.eig_lo;
        config["eig_hi"] = args.eig_hi;
    } else if (args.design == "poisson_bivariate") {
        isgd::write_dataset_csv(args.out, isgd::gen_poisson_bivariate(args.n, rng));
    } else if (args.design == "cox") {
        isgd::CoxSpec spec;
        spec.n = args.n;
        spec.p = args.p;
        spec.censor_quantile = args.censor_quantile;
        spec.min_censor_prob = args.min_censor_prob;
        if (!args.theta.empty()) spec.theta_star = to_vector(parse_double_list(args.theta));
        isgd::write_survival_csv(args.out, isgd::gen_cox(spec, rng));
        config["censor_quantile"] = args.censor_quantile;
        config["min_censor_prob"] = args.min_censor_prob;
    } else if (args.design == "contaminated") {
        isgd::ContaminatedSpec spec;
        spec.n = args.n;
        spec.p = args.p;
        spec.contamination_rate = args.contamination;
        spec.outlier_value = args.outlier;
        spec.theta_star = args.theta.empty() ? isgd::contaminated_theta_star(args.p, rng)
                                             : to_vector(parse_double_list(args.theta));
        isgd::write_dataset_csv(args.out, isgd::gen_contaminated(spec, rng));
        config["contamination"] = args.contamination;
        config["outlier"] = args.outlier;
    } else {
        std::fprintf(stderr, "gen: unknown design '%s'\n", args.design.c_str());
        return 1;
    }
    write_manifest(args.out + ".manifest.json", "gen", config, seed,
                   {{args.out, content_hash(args.out)}});
    return 0;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
    std::string data_path;
    std::string config_file;
    std::string out_dir = ".";
    std::map<std::string, std::string> values; // merged config-file + CLI values
};

int run_fit(const FitArgs& args) {
    auto value = [&args](const std::string& key) -> std::optional<std::string> {
        const auto it = args.values.find(key);
        if (it == args.values.end()) return std::nullopt;
        return it->second;
    };

    const std::string model_token = value("model").value_or("normal");
    const std::string method_token = value("method").value_or("implicit");

    isgd::SgdConfig config;
    config.method = isgd::method_from_token(method_token);
    config.rate.gamma1 = std::stod(value("gamma1").value_or("1"));
    config.rate.exponent = std::stod(value("gamma_exponent").value_or("1"));
    config.rate.mode = isgd::LearningRate::mode_from_token(value("lr_mode").value_or(
        config.method == isgd::Method::AdaGrad ? "constant" : "power"));
    config.rate.cap = std::stod(value("cap").value_or("0.3"));
    config.blowup_threshold = std::stod(value("blowup_threshold").value_or("1e8"));
    const std::string track = value("track_lambda").value_or("0");
    config.track_lambda = track == "1" || track == "true";
    config.traj_stride = std::stol(value("traj_stride").value_or("0"));
    if (const auto niters = value("niters")) config.niters = std::stol(*niters);
    if (const auto npasses = value("npasses")) config.npasses = std::stol(*npasses);
    const std::string order = value("order").value_or("sample");
    if (order == "sample")
        config.order = isgd::DataOrder::SampleWithReplacement;
    else if (order == "stream")
        config.order = isgd::DataOrder::Stream;
    else
        throw std::invalid_argument("fit: order must be sample or stream");

    if (const auto seed = value("seed")) {
        config.seed = std::stoull(*seed);
        config.seed_set = true;
    } else if (const auto env = fallback_seed()) {
        config.seed = *env;
        config.seed_set = true;
    }

    const bool is_cox = model_token == "cox";
    // the Cox driver always samples indices, so the seed rule applies
    if (is_cox) config.order = isgd::DataOrder::SampleWithReplacement;
    isgd::Dataset dataset;
    isgd::SurvivalDataset survival;
    Eigen::Index p = 0;
    if (is_cox) {
        survival = isgd::read_survival_csv(args.data_path);
        p = survival.dim();
    } else {
        dataset = isgd::read_dataset_csv(args.data_path);
        p = isgd::dataset_dim(dataset);
    }

    const std::string cond = value("conditioner").value_or("identity");
    if (cond == "identity") {
        config.conditioner = isgd::Conditioner::identity();
    } else if (cond == "adagrad") {
        config.conditioner =
            isgd::Conditioner::adagrad(p, std::stod(value("epsilon").value_or("0")));
    } else if (cond == "amari") {
        config.conditioner = isgd::Conditioner::amari(p, std::stod(value("amari_a1").value_or("1")));
    } else if (cond.rfind("fixed:", 0) == 0) {
        config.conditioner = isgd::Conditioner::make_fixed(isgd::read_matrix_csv(cond.substr(6)));
    } else {
        throw std::invalid_argument("fit: unknown conditioner '" + cond + "'");
    }

    if (const auto theta0 = value("theta0")) config.theta0 = to_vector(parse_double_list(*theta0));

    config.validate(); // usage errors before any files are touched
    if (is_cox && config.method != isgd::Method::Explicit &&
        config.method != isgd::Method::Implicit)
        throw std::invalid_argument("fit: cox supports explicit or implicit methods");

    const isgd::FitResult result =
        is_cox ? isgd::cox_fit(survival, config)
               : isgd::fit(dataset, isgd::NaturalParamModel::from_token(model_token), config);

    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    {
        std::ofstream res(out / "fit_result.csv");
        res << "coordinate,theta,avg_theta\n";
        for (Eigen::Index i = 0; i < result.theta.size(); ++i)
            res << i + 1 << ',' << isgd::format_double(result.theta(i)) << ','
                << isgd::format_double(result.avg_theta(i)) << "\n";
    }
    if (config.traj_stride > 0)
        isgd::write_trajectory_csv((out / "fit_trajectory.csv").string(), result.traj_iters,
                                   result.trajectory);
    if (config.track_lambda) {
        std::ofstream lam(out / "fit_lambda.csv");
        lam << "step,lambda\n";
        for (std::size_t i = 0; i < result.lambda_history.size(); ++i)
            lam << i + 1 << ',' << isgd::format_double(result.lambda_history[i]) << "\n";
    }

    json config_json = {{"model", model_token},
                        {"method", method_token},
                        {"gamma1", config.rate.gamma1},
                        {"gamma_exponent", config.rate.exponent},
                        {"lr_mode", value("lr_mode").value_or("power")},
                        {"conditioner", cond},
                        {"order", order},
                        {"niters", config.niters},
                        {"npasses", config.npasses},
                        {"track_lambda", config.track_lambda},
                        {"blowup_threshold", config.blowup_threshold},
                        {"diverged", result.diverged},
                        {"steps", result.steps}};
    write_manifest((out / "fit_manifest.json").string(), "fit", config_json, config.seed,
                   {{args.data_path, content_hash(args.data_path)}});

    std::printf("%s after %ld steps; results in %s\n",
                result.diverged ? "DIVERGED (partial result retained)" : "converged run finished",
                result.steps, args.out_dir.c_str());
    return result.diverged ? 2 : 0;
}

// ---------------------------------------------------------------------------
// asymp
// ---------------------------------------------------------------------------

struct AsympArgs {
    std::string eigs;
    std::string data_path;
    std::string model_token = "normal";
    std::string theta;
    double gamma1 = 0.0; // 0 = use the optimal rate
    std::string conditioner = "identity"; // identity | inverse_fisher
    double stability_gain_b = 0.0;
    double implicit_gain_b = 0.0;
    long nmax = 10000;
    double mest_psi2 = 0.0, mest_vprime0 = 0.0;
};

int run_asymp(const AsympArgs& args) {
    json output;
    bool invalid_region = false;

    std::optional<isgd::FisherInfo> fisher;
    if (!args.eigs.empty()) {
        const auto values = parse_double_list(args.eigs);
        fisher = isgd::FisherInfo::analytic(isgd::Matrix(to_vector(values).asDiagonal()));
    } else if (!args.data_path.empty()) {
        const auto data = isgd::read_dataset_csv(args.data_path);
        const auto model = isgd::NaturalParamModel::from_token(args.model_token);
        const isgd::Vector theta = args.theta.empty()
                                       ? isgd::Vector::Zero(isgd::dataset_dim(data))
                                       : to_vector(parse_double_list(args.theta));
        fisher = isgd::empirical_fisher(data, model, theta);
    }

    if (fisher) {
        const std::vector<double> eigs(fisher->eigenvalues.begin(), fisher->eigenvalues.end());
        output["fisher_eigenvalues"] = eigs;
        const double opt_gamma1 = isgd::optimal_gamma1(eigs);
        output["optimal_gamma1"] = opt_gamma1;
        const double gamma1 = args.gamma1 > 0 ? args.gamma1 : opt_gamma1;
        output["gamma1"] = gamma1;

        const Eigen::Index p = fisher->matrix.rows();
        const isgd::Matrix c = args.conditioner == "inverse_fisher"
                                   ? isgd::Matrix(fisher->matrix.inverse())
                                   : isgd::Matrix(isgd::Matrix::Identity(p, p));
        const isgd::AsympVariance sgd = isgd::sgd_asymptotic_variance(*fisher, c, gamma1);
        output["sgd_variance"] = {{"valid", sgd.valid}, {"min_condition_eig", sgd.min_condition_eig}};
        if (sgd.valid) {
            output["sgd_variance"]["sigma"] = matrix_to_json(sgd.sigma);
            output["sgd_variance"]["trace"] = sgd.sigma.trace();
        } else {
            output["sgd_variance"]["sigma"] = "invalid";
            invalid_region = true;
        }
        const isgd::AsympVariance avg = isgd::averaged_variance(*fisher);
        output["averaged"] = {{"sigma", matrix_to_json(avg.sigma)}, {"trace", avg.sigma.trace()}};
        const isgd::AsympVariance ada = isgd::adagrad_variance(*fisher, gamma1);
        output["adagrad"] = {{"sigma", matrix_to_json(ada.sigma)},
                             {"trace", ada.sigma.trace()},
                             {"rate", "1/sqrt(n)"}};
    }

    if (args.mest_psi2 > 0 && fisher) {
        const Eigen::Index p = fisher->matrix.rows();
        const isgd::AsympVariance mest = isgd::mest_variance(
            fisher->matrix, isgd::Matrix::Identity(p, p), args.mest_psi2, args.mest_vprime0);
        output["mest"] = {{"valid", mest.valid}};
        if (mest.valid) output["mest"]["sigma"] = matrix_to_json(mest.sigma);
    }

    if (args.stability_gain_b > 0) {
        const double b = args.stability_gain_b;
        output["stability_max_gain"] = isgd::stability_max_gain(b);
        // large-b comparison value; the exact product above is authoritative
        if (b > 1)
            output["stability_max_gain_asymptotic"] =
                std::pow(2.0, b) / std::sqrt(2.0 * M_PI * b);
    }
    if (args.implicit_gain_b > 0)
        output["implicit_gain_bounded"] = isgd::implicit_gain_bounded(args.implicit_gain_b, args.nmax);

    if (output.empty()) {
        std::fprintf(stderr, "asymp: nothing to do (give --eigs, --data or --stability-gain)\n");
        return 1;
    }
    std::printf("%s\n", output.dump(2).c_str());
    if (invalid_region) {
        std::fprintf(stderr, "asymp: 2 gamma1 C F - I is not positive-definite (invalid region)\n");
        return 3;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"implicit stochastic gradient descent toolkit"};
    app.require_subcommand(1);

    // --- gen ---
    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "simulate a dataset to CSV");
    gen_cmd->add_option("design", gen.design,
                        "normal_linear | poisson_bivariate | cox | contaminated")
        ->required();
    gen_cmd->add_option("--n", gen.n, "number of observations");
    gen_cmd->add_option("--p", gen.p, "covariate dimension");
    auto* gen_seed = gen_cmd->add_option("--seed", gen.seed, "PRNG seed");
    gen_cmd->add_option("--out", gen.out, "output CSV path");
    gen_cmd->add_option("--eig-lo", gen.eig_lo, "normal_linear: smallest covariance eigenvalue");
    gen_cmd->add_option("--eig-hi", gen.eig_hi, "normal_linear: largest covariance eigenvalue");
    gen_cmd->add_option("--theta", gen.theta, "comma-separated true parameter");
    gen_cmd->add_option("--censor-quantile", gen.censor_quantile, "cox: quantile anchoring b");
    gen_cmd->add_option("--min-censor-prob", gen.min_censor_prob,
                        "cox: censoring probability at the earliest time");
    gen_cmd->add_option("--contamination", gen.contamination, "contaminated: outlier probability");
    gen_cmd->add_option("--outlier", gen.outlier, "contaminated: outlier value");

    // --- fit ---
    FitArgs fit_args;
    std::map<std::string, std::string> fit_cli;
    auto* fit_cmd = app.add_subcommand("fit", "run one SGD estimation on a CSV dataset");
    fit_cmd->add_option("data", fit_args.data_path, "dataset CSV (survival CSV for --model cox)")
        ->required();
    fit_cmd->add_option("--config", fit_args.config_file, "key=value config file");
    fit_cmd->add_option("--out", fit_args.out_dir, "output directory");
    const std::vector<std::string> fit_keys = {
        "model",  "method",       "gamma1",     "gamma_exponent", "lr_mode",
        "cap",    "conditioner",  "epsilon",    "amari_a1",       "seed",
        "niters", "npasses",      "order",      "track_lambda",   "blowup_threshold",
        "traj_stride", "theta0"};
    for (const auto& key : fit_keys) {
        std::string flag = "--" + key;
        for (auto& ch : flag)
            if (ch == '_') ch = '-';
        fit_cmd->add_option_function<std::string>(
            flag, [&fit_cli, key](const std::string& v) { fit_cli[key] = v; }, key);
    }

    // --- asymp ---
    AsympArgs asymp;
    auto* asymp_cmd = app.add_subcommand("asymp", "closed-form asymptotic variances and gains");
    asymp_cmd->add_option("--eigs", asymp.eigs, "Fisher eigenvalues, comma-separated");
    asymp_cmd->add_option("--data", asymp.data_path, "estimate Fisher from this dataset CSV");
    asymp_cmd->add_option("--model", asymp.model_token, "model token for --data");
    asymp_cmd->add_option("--theta", asymp.theta, "evaluation point for --data (default 0)");
    asymp_cmd->add_option("--gamma1", asymp.gamma1, "learning rate parameter (default: optimal)");
    asymp_cmd->add_option("--conditioner", asymp.conditioner, "identity | inverse_fisher");
    asymp_cmd->add_option("--stability-gain", asymp.stability_gain_b,
                          "max explicit bias gain at b = gamma1*lambda");
    asymp_cmd->add_option("--implicit-gain", asymp.implicit_gain_b,
                          "max implicit bias gain at b = gamma1*lambda");
    asymp_cmd->add_option("--nmax", asymp.nmax, "horizon for --implicit-gain");
    asymp_cmd->add_option("--mest-psi2", asymp.mest_psi2, "M-estimation psi^2");
    asymp_cmd->add_option("--mest-vprime0", asymp.mest_vprime0, "M-estimation v'(0)");

    // --- experiment ---
    std::string exp_name;
    isgd::ExperimentIo exp_io;
    exp_io.jobs = isgd::hardware_jobs();
    std::vector<std::string> exp_sets;
    auto* exp_cmd = app.add_subcommand("experiment", "run a named replication study");
    exp_cmd->add_option("name", exp_name, "variance_sweep | normality | stability | "
                                          "poisson_appendix | cox_study | mest_study | "
                                          "averaging_study | adagrad_variance")
        ->required();
    auto* exp_seed_opt = exp_cmd->add_option("--seed", exp_io.seed, "PRNG seed (default 42)");
    exp_cmd->add_option("--jobs", exp_io.jobs, "replication worker count");
    exp_cmd->add_option("--out", exp_io.out_dir, "output directory for CSV/JSON reports");
    exp_cmd->add_option("--set", exp_sets, "override key=value (repeatable)");
    std::map<std::string, std::string> exp_overrides;
    for (const char* key : {"reps", "niters", "gamma1", "p", "n"}) {
        std::string flag = std::string("--") + key;
        exp_cmd->add_option_function<std::string>(
            flag, [&exp_overrides, key](const std::string& v) { exp_overrides[key] = v; }, key);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*gen_cmd) {
            gen.seed_given = gen_seed->count() > 0;
            return run_gen(gen);
        }
        if (*fit_cmd) {
            // precedence: CLI flag > config file > defaults
            if (!fit_args.config_file.empty()) fit_args.values = read_config_file(fit_args.config_file);
            for (const auto& [key, val] : fit_cli) fit_args.values[key] = val;
            return run_fit(fit_args);
        }
        if (*asymp_cmd) return run_asymp(asymp);
        if (*exp_cmd) {
            if (exp_seed_opt->count() == 0) {
                if (const auto env = fallback_seed()) exp_io.seed = *env;
            }
            for (const auto& kv : exp_sets) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos)
                    throw std::invalid_argument("experiment: --set expects key=value, got " + kv);
                exp_overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
            }
            if (!exp_io.out_dir.empty()) {
                std::filesystem::create_directories(exp_io.out_dir);
                write_manifest((fs::path(exp_io.out_dir) / "experiment_manifest.json").string(),
                               "experiment",
                               json{{"name", exp_name}, {"overrides", exp_overrides},
                                    {"jobs", exp_io.jobs}},
                               exp_io.seed, {});
            }
            const bool pass = isgd::run_named_experiment(exp_name, exp_io, exp_overrides);
            return pass ? 0 : 4;
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
