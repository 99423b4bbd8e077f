#pragma once

#include "invlab/baselines.hpp"
#include "invlab/bayes_oracle.hpp"
#include "invlab/datagen.hpp"
#include "invlab/networks.hpp"
#include "invlab/priors.hpp"

#include <map>
#include <string>

namespace invlab {

// A pipeline failure wrapped with the stage it happened in; the CLI prints
// "[stage] message" and exits nonzero.
struct StageError : std::runtime_error {
    std::string stage;
    StageError(std::string stage_, const std::string& msg)
        : std::runtime_error("[" + stage_ + "] " + msg), stage(std::move(stage_)) {}
};

enum class ErrorSpace { parameter, velocity };

// Relative l2 error in the requested space; velocity inverts both vectors
// componentwise first and demands strictly positive slowness.
double rel_l2_space(const Vector& m_hat, const Vector& m_true, ErrorSpace space);

// One experiment: problem + prior + architecture + objective + scale knobs.
// Prior parameters default to the problem's published table values.
struct ExperimentConfig {
    int format_version = 1;
    std::string problem_id = "wing";
    PriorFamily family = PriorFamily::gaussian_correlated;
    double sigma = 0.0;   // prior std
    double delta = 0.0;   // correlation / step length
    double m0 = 0.0;      // constant prior mean level
    std::size_t K = 0;    // training samples
    double sigma_d = 0.0; // observation noise
    Arch arch = Arch::mlp;
    Objective objective = Objective::erm;
    double alpha = 1.0;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::size_t epochs = 1000;
    std::vector<std::size_t> widths;  // nonempty overrides the MLP hidden sizes
    bool train_net = true;            // false = baselines only
    bool bending = false;             // tomo ray bending
};

// Table defaults for the problem; family applied first so family-specific
// scale rules can key off it later if needed.
ExperimentConfig default_config(const std::string& problem_id);

// Named presets: wing-desk, interface-desk, tomo-desk (reduced K/epochs,
// halved MLP), and wing-paper, interface-paper, tomo-paper (full scale).
ExperimentConfig profile(const std::string& name);

// JSON round trip. Parsing starts from default_config of the "problem" key,
// requires format_version 1, and rejects unknown keys.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);

struct RunReport {
    int format_version = 1;
    ExperimentConfig config;
    Vector m_true;
    Vector d_obs;
    std::uint64_t obs_stream = 0;
    std::map<std::string, Vector> recon;   // method -> reconstruction
    std::map<std::string, double> e_rel;   // method -> error (velocity space for tomo)
    double train_best_val = 0.0;
    std::size_t train_best_epoch = 0;
    double wall_seconds = 0.0;
};

// Full pipeline: model, prior, dataset, (train), fixed d_obs, baselines,
// metrics. Failures rethrow as StageError naming the stage. Nothing is
// written to disk; pair with report_emit / report_json.
RunReport run(const ExperimentConfig& cfg);

// Report serialization (wall_seconds included; byte-stable otherwise for a
// fixed config + seed).
std::string report_json(const RunReport& rep);
RunReport report_from_json(const std::string& text);

// metrics.csv, reconstructions.csv (first report's problem), meta.json.
void report_emit(const std::vector<RunReport>& reports, const std::string& dir);

}  // namespace invlab
