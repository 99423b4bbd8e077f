#include "invlab/experiments.hpp"
#include "invlab/rng.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

using namespace invlab;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string profile_name;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "experiment config JSON file");
    cmd->add_option("--profile", f.profile_name, "named preset (e.g. wing-desk)");
    cmd->add_option("--seed", f.seed, "RNG seed override");
    cmd->add_option("--out", f.out_dir, "output directory override");
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig resolve_config(const CommonFlags& f) {
    if (!f.config_path.empty() && !f.profile_name.empty())
        throw SpecError("pass either --config or --profile, not both");
    ExperimentConfig cfg;
    if (!f.config_path.empty())
        cfg = config_from_json(slurp(f.config_path));
    else if (!f.profile_name.empty())
        cfg = profile(f.profile_name);
    else
        throw SpecError("one of --config or --profile is required");
    if (f.seed) cfg.seed = *f.seed;
    if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
    return cfg;
}

std::unique_ptr<ForwardModel> build_model(const ExperimentConfig& cfg) {
    if (cfg.problem_id == "wing") return std::make_unique<WingModel>();
    if (cfg.problem_id == "interface") return std::make_unique<InterfaceModel>();
    if (cfg.problem_id == "tomo") return std::make_unique<TomoModel>(cfg.bending);
    throw DomainError("unknown problem id: " + cfg.problem_id);
}

PriorSpec build_prior(const ExperimentConfig& cfg, std::size_t N) {
    PriorSpec ps = problem_prior(cfg.problem_id, cfg.family);
    ps.sigma = cfg.sigma;
    ps.delta = cfg.delta;
    ps.m0.assign(N, cfg.m0);
    return ps;
}

int cmd_generate(const CommonFlags& f) {
    const ExperimentConfig cfg = resolve_config(f);
    auto model = build_model(cfg);
    const Dataset ds = generate(*model, build_prior(cfg, model->param_dim()), cfg.K, cfg.sigma_d,
                                cfg.seed, cfg.problem_id);
    save_dataset(ds, cfg.out_dir);
    std::fprintf(stderr, "[datagen] wrote %zu samples to %s\n", ds.m.rows, cfg.out_dir.c_str());
    return 0;
}

int cmd_train(const CommonFlags& f) {
    const ExperimentConfig cfg = resolve_config(f);
    auto model = build_model(cfg);
    const Dataset ds = generate(*model, build_prior(cfg, model->param_dim()), cfg.K, cfg.sigma_d,
                                cfg.seed, cfg.problem_id);
    NetSpec ns = default_spec(cfg.arch, cfg.problem_id);
    if (!cfg.widths.empty()) {
        if (cfg.arch != Arch::mlp)
            throw SpecError("widths override only applies to the mlp architecture");
        ns.hidden = cfg.widths;
    }
    TrainConfig tc;
    tc.objective = cfg.objective;
    tc.alpha = cfg.alpha;
    tc.seed = cfg.seed;
    tc.max_epochs = cfg.epochs;
    const TrainedOperator op = train(ns, ds, tc, model.get());
    const std::string dir = cfg.out_dir + "/model";
    save_trained(op, dir);
    std::fprintf(stderr, "[train] best val %.6g at epoch %zu; saved to %s\n", op.best_val,
                 op.best_epoch, dir.c_str());
    return 0;
}

int run_and_emit(ExperimentConfig cfg) {
    const RunReport rep = run(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    report_emit({rep}, cfg.out_dir);
    std::ofstream out(cfg.out_dir + "/report.json", std::ios::binary);
    out << report_json(rep);
    if (!out) throw DomainError("write failed: " + cfg.out_dir + "/report.json");
    for (const auto& [method, e] : rep.e_rel)
        std::fprintf(stderr, "[metrics] %s e_rel %.6g\n", method.c_str(), e);
    std::fprintf(stderr, "[report] wrote %s\n", (cfg.out_dir + "/report.json").c_str());
    return 0;
}

int cmd_baseline(const CommonFlags& f) {
    ExperimentConfig cfg = resolve_config(f);
    cfg.train_net = false;
    return run_and_emit(std::move(cfg));
}

int cmd_run(const CommonFlags& f) { return run_and_emit(resolve_config(f)); }

// Replicate decomposition on the built-in enumerable demo problem.
int cmd_oracle(const CommonFlags& f) {
    std::uint64_t seed = f.seed.value_or(0);
    const std::string out = f.out_dir.empty() ? "out" : f.out_dir;

    Matrix G(2, 2);
    G(0, 0) = 1.0;
    G(0, 1) = 0.4;
    G(1, 1) = 0.8;
    LinearModel lin(G);
    DiscretePrior prior;
    RngStream r(seed, 1);
    for (int a = 0; a < 64; ++a) prior.atoms.push_back({r.normal(), r.normal()});
    prior.weights.assign(64, 1.0 / 64.0);
    OracleProblem prob(prior, lin, 0.5);

    NetSpec ns;
    ns.arch = Arch::mlp;
    ns.in_dim = 2;
    ns.out_dim = 2;
    ns.hidden = {16, 16};
    ns.dropout = 0.0;
    ns.softplus_output = false;
    ns.use_batchnorm = false;
    TrainConfig tc;
    tc.batch = 64;
    tc.max_epochs = 120;
    tc.patience = 30;

    const DecompResult res = bias_variance_decompose(prob, ns, tc, 8, 2000, 2000, seed);
    const std::string text = decomposition_report(res);
    std::filesystem::create_directories(out);
    std::ofstream file(out + "/decomposition.json", std::ios::binary);
    file << text;
    if (!file) throw DomainError("write failed: " + out + "/decomposition.json");
    std::printf("%s\n", text.c_str());
    std::fprintf(stderr, "[oracle] wrote %s\n", (out + "/decomposition.json").c_str());
    return 0;
}

int cmd_report(const std::vector<std::string>& report_paths, const CommonFlags& f) {
    if (report_paths.empty()) throw SpecError("report: at least one report.json path required");
    std::vector<RunReport> reports;
    for (const auto& p : report_paths) reports.push_back(report_from_json(slurp(p)));
    const std::string out = f.out_dir.empty() ? "out" : f.out_dir;
    report_emit(reports, out);
    std::fprintf(stderr, "[report] wrote %zu reports to %s\n", reports.size(), out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"learned-inversion laboratory"};
    app.require_subcommand(1);

    CommonFlags fl;
    std::vector<std::string> report_paths;

    CLI::App* generate = app.add_subcommand("generate", "sample a training dataset");
    add_common(generate, fl);
    CLI::App* train = app.add_subcommand("train", "train an inverse operator");
    add_common(train, fl);
    CLI::App* baseline = app.add_subcommand("baseline", "classical estimators only");
    add_common(baseline, fl);
    CLI::App* oracle = app.add_subcommand("oracle", "enumerable bias-variance decomposition");
    add_common(oracle, fl);
    CLI::App* runc = app.add_subcommand("run", "full experiment pipeline");
    add_common(runc, fl);
    CLI::App* report = app.add_subcommand("report", "merge run reports into tables");
    add_common(report, fl);
    report->add_option("reports", report_paths, "report.json files");

    CLI11_PARSE(app, argc, argv);

    const char* stage_name = "cli";
    try {
        if (generate->parsed()) return cmd_generate(fl);
        if (train->parsed()) return cmd_train(fl);
        if (baseline->parsed()) return cmd_baseline(fl);
        if (oracle->parsed()) return cmd_oracle(fl);
        if (runc->parsed()) return cmd_run(fl);
        if (report->parsed()) return cmd_report(report_paths, fl);
    } catch (const StageError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "[%s] %s\n", stage_name, e.what());
        return 1;
    }
    return 1;
}
