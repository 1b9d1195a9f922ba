#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "brmdp/model.hpp"
#include "brmdp/posterior.hpp"
#include "brmdp/risk.hpp"
#include "brmdp/solvers.hpp"

namespace brmdp {

struct FormulationSpec {
    std::string label;
    bool empirical = false;  // plug-in MLE instead of a posterior
    RiskFunctional rho;
};

enum class SolverKind { exact, nso, ucb };

struct SolverSpec {
    SolverKind kind = SolverKind::exact;
    ExactOptions exact;
    NsoOptions nso;
    UcbOptions ucb;
};

enum class EvalMode { exact, rollout };

struct EvaluationSpec {
    EvalMode mode = EvalMode::exact;
    int episodes = 10000;
    int quadrature_points = 256;
};

struct PriorSpec {
    enum class Kind { uniform, weights, normal };
    Kind kind = Kind::uniform;
    Eigen::VectorXd weights;
    double mean = 0.0;
    double variance = 1e6;
};

struct ExperimentConfig {
    std::string name = "experiment";
    Environment env;
    double true_theta = 0.0;
    PriorSpec prior;
    std::vector<int> data_sizes{10};
    int replications = 1;
    std::uint64_t seed = 1;
    std::vector<FormulationSpec> formulations;
    /// Solver for the posterior formulations; default is exact DP for a finite
    /// Theta and NSO otherwise. The empirical formulation always uses exact DP.
    std::optional<SolverSpec> solver;
    EvaluationSpec evaluation;
    /// Known optimum under the true parameter; computed when absent.
    std::optional<double> v_star;
    double histogram_bin = 0.05;
};

struct ReplicationResult {
    std::string formulation;
    int data_size = 0;
    int replication = 0;
    double estimate = NAN;         // MLE or posterior mean of theta
    double solver_value = NAN;     // stage-0 value the solver reported
    double true_performance = NAN;
    double std_error = 0.0;        // rollout standard error; 0 in exact mode
    std::size_t augmented_states = 0;
    bool ok = false;
    std::string message;
    double seconds = 0.0;          // wall time; kept out of the CSVs
    std::vector<std::size_t> stage_sizes;
};

struct SummaryRow {
    std::string formulation;
    int data_size = 0;
    int replications = 0;  // successful ones
    int failures = 0;
    double average = NAN;
    double std = NAN;      // population std (divisor = replications)
    double d_value = NAN;
};

struct ExperimentOutput {
    double v_star = NAN;
    std::vector<ReplicationResult> results;
    std::vector<SummaryRow> summary;
};

/// Prior over Theta built from a PriorSpec.
Posterior make_prior(const PriorSpec& spec, const ParametricFamily& family);

/// Maximum-likelihood estimate of theta over Theta. Finite Theta: argmax over
/// atoms, ties to the smaller atom. Continuous: closed form (Poisson,
/// geometric) or a 1-D search (truncated normal), clamped to Theta.
double mle(const ParametricFamily& family, std::span<const double> data);

/// Copy of `env` whose parameter space is the single atom `theta`.
Environment plug_in_environment(const Environment& env, double theta);

struct Evaluation {
    double value = 0.0;
    double std_error = 0.0;
};

/// Expected total cost of `sol`'s policy when the data come from theta_c.
/// Beliefs keep evolving along each trajectory the way the solver tracked them.
Evaluation evaluate_true_performance(const Environment& env, const SolveResult& sol, double theta_c,
                                     const EvaluationSpec& spec, Stream stream);

/// Solves one formulation for one dataset.
SolveResult solve_formulation(const ExperimentConfig& cfg, const FormulationSpec& f,
                              std::span<const double> data, Stream stream, double* estimate = nullptr);

/// Optimal value under the true parameter.
double true_optimum(const ExperimentConfig& cfg);

/// Runs every (data size, replication, formulation). `log` receives one JSON
/// line per replication (wall time and solver diagnostics).
ExperimentOutput run_experiment(const ExperimentConfig& cfg, int threads = 1, std::ostream* log = nullptr);

std::vector<SummaryRow> summarize(const std::vector<ReplicationResult>& results,
                                  const std::vector<FormulationSpec>& formulations,
                                  const std::vector<int>& data_sizes, double v_star);

/// Writes replications.csv, summary.csv and histogram.csv into `dir`.
void emit(const ExperimentOutput& out, const ExperimentConfig& cfg, const std::filesystem::path& dir);

/// Shortest round-trip decimal form of x.
std::string format_double(double x);
/// One RFC-4180 field.
std::string csv_field(const std::string& s);

}  // namespace brmdp
