#include "invlab/experiments.hpp"

#include "invlab/rng.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

namespace invlab {

namespace {

constexpr std::uint64_t STREAM_OBS = 909;

using nlohmann::json;

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

double problem_sigma_d(const std::string& problem_id) {
    if (problem_id == "wing") return 0.01;
    if (problem_id == "interface") return 0.1;
    if (problem_id == "tomo") return 0.001;
    throw DomainError("unknown problem id: " + problem_id);
}

json config_json_obj(const ExperimentConfig& cfg) {
    json j;
    j["format_version"] = cfg.format_version;
    j["problem"] = cfg.problem_id;
    j["family"] = to_string(cfg.family);
    j["sigma"] = cfg.sigma;
    j["delta"] = cfg.delta;
    j["m0"] = cfg.m0;
    j["K"] = cfg.K;
    j["sigma_d"] = cfg.sigma_d;
    j["arch"] = to_string(cfg.arch);
    j["objective"] = to_string(cfg.objective);
    j["alpha"] = cfg.alpha;
    j["seed"] = cfg.seed;
    j["out"] = cfg.out_dir;
    j["epochs"] = cfg.epochs;
    j["widths"] = cfg.widths;
    j["train"] = cfg.train_net;
    j["bending"] = cfg.bending;
    return j;
}

ExperimentConfig config_from_json_obj(const json& j) {
    if (!j.is_object()) throw SpecError("config: expected a JSON object");
    if (!j.contains("format_version") || !j["format_version"].is_number_integer() ||
        j["format_version"].get<int>() != 1)
        throw SpecError("config: format_version must be 1");
    if (!j.contains("problem")) throw SpecError("config: missing problem");

    ExperimentConfig cfg = default_config(j["problem"].get<std::string>());
    for (const auto& [key, val] : j.items()) {
        if (key == "format_version" || key == "problem") continue;
        if (key == "family")
            cfg.family = prior_family_from_string(val.get<std::string>());
        else if (key == "sigma")
            cfg.sigma = val.get<double>();
        else if (key == "delta")
            cfg.delta = val.get<double>();
        else if (key == "m0")
            cfg.m0 = val.get<double>();
        else if (key == "K")
            cfg.K = val.get<std::size_t>();
        else if (key == "sigma_d")
            cfg.sigma_d = val.get<double>();
        else if (key == "arch")
            cfg.arch = arch_from_string(val.get<std::string>());
        else if (key == "objective")
            cfg.objective = objective_from_string(val.get<std::string>());
        else if (key == "alpha")
            cfg.alpha = val.get<double>();
        else if (key == "seed")
            cfg.seed = val.get<std::uint64_t>();
        else if (key == "out")
            cfg.out_dir = val.get<std::string>();
        else if (key == "epochs")
            cfg.epochs = val.get<std::size_t>();
        else if (key == "widths")
            cfg.widths = val.get<std::vector<std::size_t>>();
        else if (key == "train")
            cfg.train_net = val.get<bool>();
        else if (key == "bending")
            cfg.bending = val.get<bool>();
        else
            throw SpecError("config: unknown key '" + key + "'");
    }
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("cannot open " + path);
    out << text;
    if (!out) throw DomainError("write failed: " + path);
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

double rel_l2_space(const Vector& m_hat, const Vector& m_true, ErrorSpace space) {
    if (space == ErrorSpace::parameter) return rel_l2(m_hat, m_true);
    if (m_hat.size() != m_true.size()) throw ShapeError("rel_l2_space: size mismatch");
    Vector v_hat(m_hat.size()), v_true(m_true.size());
    for (std::size_t j = 0; j < m_hat.size(); ++j) {
        if (!(m_hat[j] > 0.0))
            throw DomainError("rel_l2_space: nonpositive slowness in velocity space");
        if (m_true[j] == 0.0) throw DomainError("rel_l2_space: zero reference slowness");
        v_hat[j] = 1.0 / m_hat[j];
        v_true[j] = 1.0 / m_true[j];
    }
    return rel_l2(v_hat, v_true);
}

ExperimentConfig default_config(const std::string& problem_id) {
    PriorSpec ps = problem_prior(problem_id, PriorFamily::gaussian_correlated);
    ExperimentConfig cfg;
    cfg.problem_id = problem_id;
    cfg.sigma = ps.sigma;
    cfg.delta = ps.delta;
    cfg.m0 = ps.m0.empty() ? 0.0 : ps.m0[0];
    cfg.K = problem_prior_count(problem_id);
    cfg.sigma_d = problem_sigma_d(problem_id);
    return cfg;
}

ExperimentConfig profile(const std::string& name) {
    auto desk = [](const std::string& problem) {
        ExperimentConfig cfg = default_config(problem);
        cfg.K = 10000;
        cfg.epochs = 300;
        cfg.widths = {64, 128, 256, 128, 64};
        return cfg;
    };
    if (name == "wing-desk") return desk("wing");
    if (name == "interface-desk") return desk("interface");
    if (name == "tomo-desk") return desk("tomo");
    if (name == "wing-paper") return default_config("wing");
    if (name == "interface-paper") return default_config("interface");
    if (name == "tomo-paper") {
        ExperimentConfig cfg = default_config("tomo");
        cfg.bending = true;
        return cfg;
    }
    throw DomainError("unknown profile: " + name);
}

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw SpecError(std::string("config: ") + e.what());
    }
    return config_from_json_obj(j);
}

std::string config_to_json(const ExperimentConfig& cfg) { return config_json_obj(cfg).dump(2); }

RunReport run(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    RunReport rep;
    rep.config = cfg;

    stage("config", [&] {
        problem_sigma_d(cfg.problem_id);  // validates the id
        if (!(cfg.sigma > 0.0)) throw SpecError("sigma must be positive");
        if (!(cfg.sigma_d > 0.0)) throw SpecError("sigma_d must be positive");
        if (cfg.K == 0) throw SpecError("K must be positive");
        if (cfg.epochs == 0) throw SpecError("epochs must be positive");
        if (cfg.objective == Objective::pinn && !(cfg.alpha >= 0.0))
            throw SpecError("alpha must be nonnegative");
        if (!cfg.widths.empty() && cfg.arch != Arch::mlp)
            throw SpecError("widths override only applies to the mlp architecture");
    });

    std::unique_ptr<ForwardModel> model = stage("model", [&]() -> std::unique_ptr<ForwardModel> {
        if (cfg.problem_id == "wing") return std::make_unique<WingModel>();
        if (cfg.problem_id == "interface") return std::make_unique<InterfaceModel>();
        return std::make_unique<TomoModel>(cfg.bending);
    });

    PriorSpec prior = stage("prior", [&] {
        PriorSpec ps = problem_prior(cfg.problem_id, cfg.family);
        ps.sigma = cfg.sigma;
        ps.delta = cfg.delta;
        ps.m0.assign(model->param_dim(), cfg.m0);
        return ps;
    });

    Dataset ds = stage("datagen", [&] {
        return generate(*model, prior, cfg.K, cfg.sigma_d, cfg.seed, cfg.problem_id);
    });

    stage("observe", [&] {
        rep.m_true = true_model(cfg.problem_id);
        rep.d_obs = model->evaluate(rep.m_true);
        rep.obs_stream = STREAM_OBS;
        RngStream noise(cfg.seed, STREAM_OBS);
        for (auto& v : rep.d_obs) v += cfg.sigma_d * noise.normal();
    });

    if (cfg.train_net) {
        stage("train", [&] {
            NetSpec ns = default_spec(cfg.arch, cfg.problem_id);
            if (!cfg.widths.empty()) ns.hidden = cfg.widths;
            TrainConfig tc;
            tc.objective = cfg.objective;
            tc.alpha = cfg.alpha;
            tc.seed = cfg.seed;
            tc.max_epochs = cfg.epochs;
            TrainedOperator op = train(ns, ds, tc, model.get());
            rep.train_best_val = op.best_val;
            rep.train_best_epoch = op.best_epoch;
            rep.recon["net"] = op.predict(rep.d_obs);
        });
    }

    stage("baseline", [&] {
        MapConfig mc = problem_map_config(cfg.problem_id, cfg.sigma_d);
        if (const Matrix* G = model->linear_matrix())
            rep.recon["map"] = map_linear(*G, rep.d_obs, mc);
        else
            rep.recon["map"] = gauss_newton(*model, rep.d_obs, mc).m;
        rep.recon["prior-mean"] = prior_mean(ds);
    });

    stage("metrics", [&] {
        const ErrorSpace space =
            cfg.problem_id == "tomo" ? ErrorSpace::velocity : ErrorSpace::parameter;
        for (const auto& [method, m_hat] : rep.recon)
            rep.e_rel[method] = rel_l2_space(m_hat, rep.m_true, space);
    });

    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

std::string report_json(const RunReport& rep) {
    json j;
    j["format_version"] = rep.format_version;
    j["config"] = config_json_obj(rep.config);
    j["m_true"] = rep.m_true;
    j["d_obs"] = rep.d_obs;
    j["obs_stream"] = rep.obs_stream;
    json recon = json::object();
    for (const auto& [k, v] : rep.recon) recon[k] = v;
    j["recon"] = recon;
    json erel = json::object();
    for (const auto& [k, v] : rep.e_rel) erel[k] = v;
    j["e_rel"] = erel;
    j["train_best_val"] = rep.train_best_val;
    j["train_best_epoch"] = rep.train_best_epoch;
    j["wall_seconds"] = rep.wall_seconds;
    return j.dump(2);
}

RunReport report_from_json(const std::string& text) {
    json j = json::parse(text);
    if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
        throw SpecError("report: format_version must be 1");
    RunReport rep;
    rep.config = config_from_json_obj(j["config"]);
    rep.m_true = j["m_true"].get<Vector>();
    rep.d_obs = j["d_obs"].get<Vector>();
    rep.obs_stream = j["obs_stream"].get<std::uint64_t>();
    for (const auto& [k, v] : j["recon"].items()) rep.recon[k] = v.get<Vector>();
    for (const auto& [k, v] : j["e_rel"].items()) rep.e_rel[k] = v.get<double>();
    rep.train_best_val = j["train_best_val"].get<double>();
    rep.train_best_epoch = j["train_best_epoch"].get<std::size_t>();
    rep.wall_seconds = j["wall_seconds"].get<double>();
    return rep;
}

void report_emit(const std::vector<RunReport>& reports, const std::string& dir) {
    if (reports.empty()) throw DomainError("report_emit: no reports");
    std::filesystem::create_directories(dir);

    static const std::vector<std::string> kMethods = {"net", "map", "prior-mean"};
    std::string metrics = "problem,family,arch,objective,seed,e_rel_net,e_rel_map,e_rel_prior_mean\n";
    for (const auto& rep : reports) {
        metrics += rep.config.problem_id + "," + to_string(rep.config.family) + "," +
                   to_string(rep.config.arch) + "," + to_string(rep.config.objective) + "," +
                   std::to_string(rep.config.seed);
        for (const auto& method : kMethods) {
            auto it = rep.e_rel.find(method);
            metrics += ",";
            if (it != rep.e_rel.end()) metrics += fmt17(it->second);
        }
        metrics += "\n";
    }
    write_text(dir + "/metrics.csv", metrics);

    // Reconstructions for the first report's problem, one column per
    // report x method.
    const std::string& problem = reports.front().config.problem_id;
    const Vector& m_true = reports.front().m_true;
    Vector coord(m_true.size());
    if (problem == "wing") {
        WingModel wm;
        coord = wm.t_grid;
    } else if (problem == "interface") {
        InterfaceModel im;
        coord = im.w_grid;
    } else {
        for (std::size_t j = 0; j < coord.size(); ++j) coord[j] = static_cast<double>(j);
    }

    std::string rc = "coord,m_true";
    std::vector<const Vector*> cols;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        if (reports[i].config.problem_id != problem) continue;
        for (const auto& [method, vec] : reports[i].recon) {
            rc += ",r" + std::to_string(i) + "_" + method;
            cols.push_back(&vec);
        }
    }
    rc += "\n";
    for (std::size_t j = 0; j < m_true.size(); ++j) {
        rc += fmt17(coord[j]) + "," + fmt17(m_true[j]);
        for (const Vector* c : cols) rc += "," + fmt17((*c)[j]);
        rc += "\n";
    }
    write_text(dir + "/reconstructions.csv", rc);

    json meta;
    meta["format_version"] = 1;
    meta["reports"] = json::array();
    for (const auto& rep : reports) meta["reports"].push_back(json::parse(report_json(rep)));
    write_text(dir + "/meta.json", meta.dump(2));
}

}  // namespace invlab
