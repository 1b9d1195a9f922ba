#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "brmdp/config.hpp"
#include "brmdp/environments.hpp"
#include "brmdp/harness.hpp"

using namespace brmdp;
using doctest::Approx;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json small_inventory() {
    return json::parse(R"({
        "environment": "inventory",
        "inventory": {"horizon": 3},
        "true_theta": 2.0,
        "data_sizes": [0, 5],
        "replications": 4,
        "seed": 99,
        "alpha": 0.8,
        "formulations": [
            {"label": "mean", "risk": "mean"},
            {"label": "cvar, tail", "risk": "cvar"},
            {"type": "empirical"}
        ]
    })");
}

}  // namespace

TEST_SUITE("harness") {
    TEST_CASE("maximum likelihood") {
        const auto sp = ParameterSpace::finite((Eigen::VectorXd(5) << 1.2, 1.6, 2.0, 2.4, 2.8).finished());
        const auto pois = ParametricFamily::poisson(sp);
        const std::vector<double> twos{2, 2, 2};
        CHECK(mle(pois, twos) == 2.0);
        CHECK(mle(pois, std::vector<double>{1.2 * 0 + 1}) == 1.2);
        CHECK_THROWS_AS(mle(pois, std::vector<double>{}), DomainError);

        // Likelihood ties go to the smaller atom.
        const auto geo = ParametricFamily::geometric(ParameterSpace::finite(Eigen::Vector2d(0.25, 0.5)));
        CHECK(mle(geo, std::vector<double>{1.0}) == 0.5);

        const auto cont = ParametricFamily::poisson(ParameterSpace::continuous(0.0));
        Stream s(4);
        std::vector<double> data(10000);
        for (auto& x : data) x = cont.sample(2.0, s);
        CHECK(std::abs(mle(cont, data) - 2.0) < 0.06);

        const auto tn = ParametricFamily::truncated_normal(ParameterSpace::continuous(1.0), 2.0, 1.0);
        std::vector<double> tdata(20000);
        for (auto& x : tdata) x = tn.sample(2.0, s);
        CHECK(std::abs(mle(tn, tdata) - 2.0) < 0.08);
        CHECK(mle(tn, std::vector<double>{1.0, 1.0}) == Approx(1.0).epsilon(1e-6));
    }

    TEST_CASE("plug-in environments have a single atom") {
        const Environment env = build_inventory({});
        const Environment p = plug_in_environment(env, 2.4);
        REQUIRE(p.family.space().is_finite());
        CHECK(p.family.space().atoms().size() == 1);
        CHECK(p.family.space().atoms()[0] == 2.4);
    }

    TEST_CASE("csv fields and numbers") {
        CHECK(csv_field("plain") == "plain");
        CHECK(csv_field("a,b") == "\"a,b\"");
        CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
        CHECK(csv_field("two\nlines") == "\"two\nlines\"");
        CHECK(format_double(0.1) == "0.1");
        CHECK(format_double(30.05) == "30.05");
        CHECK(format_double(NAN).empty());
        CHECK(format_double(INFINITY) == "inf");
        CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    }

    TEST_CASE("summary statistics") {
        std::vector<ReplicationResult> rs;
        for (double v : {18.0, 19.0, 18.0, 21.0}) {
            ReplicationResult r;
            r.formulation = "f";
            r.data_size = 10;
            r.true_performance = v;
            r.ok = true;
            rs.push_back(r);
        }
        ReplicationResult bad;
        bad.formulation = "f";
        bad.data_size = 10;
        rs.push_back(bad);
        FormulationSpec f;
        f.label = "f";
        const auto rows = summarize(rs, {f}, {10}, 18.0);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].replications == 4);
        CHECK(rows[0].failures == 1);
        CHECK(rows[0].average == Approx(19.0));
        CHECK(rows[0].std == Approx(std::sqrt(1.5)));
        CHECK(rows[0].d_value == Approx((1.0 + 9.0) / (4.0 * 18.0 * 18.0)));
    }

    TEST_CASE("true performance: exact recursion and rollouts agree") {
        const Environment env = build_inventory({});
        const auto sol = exact_dp(env, uniform_prior(env.family.space()), RiskFunctional::expectation());
        EvaluationSpec ex, ro;
        ro.mode = EvalMode::rollout;
        ro.episodes = 100000;
        const auto a = evaluate_true_performance(env, sol, 2.0, ex, Stream(1));
        const auto b = evaluate_true_performance(env, sol, 2.0, ro, Stream(1));
        CHECK(a.std_error == 0.0);
        CHECK(std::abs(a.value - b.value) < 4.0 * b.std_error);
    }

    TEST_CASE("the optimal plug-in policy attains the optimum") {
        const Environment env = build_inventory({});
        const Environment p = plug_in_environment(env, 2.0);
        const auto sol = exact_dp(p, point_mass(p.family.space(), 2.0), RiskFunctional::expectation());
        const auto ev = evaluate_true_performance(env, sol, 2.0, {}, Stream(1));
        CHECK(ev.value == Approx(sol.value).epsilon(1e-12));
        const auto other = exact_dp(env, uniform_prior(env.family.space()), RiskFunctional::cvar(0.8));
        CHECK(evaluate_true_performance(env, other, 2.0, {}, Stream(1)).value >= sol.value - 1e-9);
    }

    TEST_CASE("experiments are reproducible across thread counts") {
        const auto cfg = parse_experiment(small_inventory());
        const auto a = run_experiment(cfg, 1), b = run_experiment(cfg, 3);
        const auto dir = std::filesystem::temp_directory_path() / "brmdp_harness_test";
        std::filesystem::remove_all(dir);
        emit(a, cfg, dir / "a");
        emit(b, cfg, dir / "b");
        for (const char* f : {"replications.csv", "summary.csv", "histogram.csv"})
            CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
        const std::string summary = slurp(dir / "a" / "summary.csv");
        CHECK(summary.rfind("formulation,data_size,replications,failures,average,std,d_value,v_star\r\n", 0) == 0);
        CHECK(summary.find("\"cvar, tail\"") != std::string::npos);
        CHECK(a.results.size() == 2 * 4 * 3);
        for (const auto& r : a.results) CHECK(r.ok);
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("empty results give header-only files") {
        const auto cfg = parse_experiment(small_inventory());
        ExperimentOutput out;
        out.v_star = 1.0;
        const auto dir = std::filesystem::temp_directory_path() / "brmdp_harness_empty";
        emit(out, cfg, dir);
        CHECK(slurp(dir / "replications.csv") ==
              "formulation,data_size,replication,estimate,solver_value,true_performance,std_error,augmented_states,"
              "status,message\r\n");
        CHECK(slurp(dir / "histogram.csv") == "formulation,data_size,bin_lower,bin_upper,count\r\n");
        std::filesystem::remove_all(dir);
    }
}

TEST_SUITE("config") {
    TEST_CASE("unknown keys are rejected") {
        json j = small_inventory();
        j["replicatons"] = 3;
        CHECK_THROWS_AS(parse_experiment(j), ConfigError);
        j = small_inventory();
        j["inventory"]["capacty"] = 3;
        CHECK_THROWS_AS(parse_experiment(j), ConfigError);
    }

    TEST_CASE("formulation labels and defaults") {
        const auto cfg = parse_experiment(small_inventory());
        REQUIRE(cfg.formulations.size() == 3);
        CHECK(cfg.formulations[1].rho.kind == RiskFunctional::Kind::cvar);
        CHECK(cfg.formulations[1].rho.alpha == 0.8);
        CHECK(cfg.formulations[2].empirical);
        CHECK(cfg.formulations[2].label == "empirical");
        CHECK(*cfg.env.horizon == 3);
        json j = small_inventory();
        j["formulations"].push_back({{"label", "mean"}});
        CHECK_THROWS_AS(parse_experiment(j), ConfigError);
    }

    TEST_CASE("maze blocks") {
        const auto j = json::parse(R"({
            "environment": "maze",
            "maze": {"variant": "uncertain_cost", "theta": {"lower": 1.0}, "stddev": 2.0},
            "true_theta": 5.5,
            "formulations": [{"risk": "var"}]
        })");
        const auto cfg = parse_experiment(j);
        CHECK(cfg.env.family.kind() == ParametricFamily::Kind::truncated_normal);
        CHECK(cfg.prior.kind == PriorSpec::Kind::normal);
        json k = j;
        k["maze"]["variant"] = "uncertain_transition";
        CHECK_THROWS_AS(parse_experiment(k), ConfigError);
    }

    TEST_CASE("bandit instances") {
        const auto j = json::parse(R"({
            "machines": [[{"type": "bernoulli", "p": 0.1}], [{"type": "uniform", "lo": 0.2, "hi": 0.6}]],
            "checkpoints": [10, 100],
            "runs": 5
        })");
        const auto spec = parse_bandit(j);
        CHECK(spec.instance.machines() == 2);
        CHECK(spec.instance.values()[1] == Approx(0.4));
        json k = j;
        k["checkpoints"] = {1};
        CHECK_THROWS_AS(parse_bandit(k), ConfigError);
    }
}
