#include <doctest.h>

#include <cmath>
#include <numbers>

#include "brmdp/bandit.hpp"
#include "brmdp/environments.hpp"
#include "brmdp/infinite.hpp"
#include "tiny_env.hpp"

using namespace brmdp;
using doctest::Approx;

namespace {

BanditInstance two_arms(double p0, double p1) {
    BanditInstance inst;
    inst.costs = {{CostSampler::bernoulli(p0)}, {CostSampler::bernoulli(p1)}};
    return inst;
}

Environment discounted_tiny(Eigen::VectorXd atoms = Eigen::Vector2d(0.3, 0.7)) {
    Environment env = tiny_environment(std::move(atoms));
    env.horizon.reset();
    env.validate();
    return env;
}

}  // namespace

TEST_SUITE("bandit") {
    TEST_CASE("bound formula") {
        CHECK(regret_bound(Eigen::Vector2d(0.0, 0.0), 100) == 0.0);
        const double b = regret_bound(Eigen::Vector2d(0.0, 0.8), 10000);
        CHECK(b == Approx(8.0 * std::log(1e4) / 0.8 + (1.0 + std::numbers::pi * std::numbers::pi / 3.0) * 0.8));
        CHECK(b == Approx(95.53).epsilon(1e-4));
    }

    TEST_CASE("regret is the gap-weighted play count") {
        const auto inst = two_arms(0.2, 0.7);
        RegretLedger led(inst);
        CHECK(led.gaps[0] == Approx(0.0));
        CHECK(led.gaps[1] == Approx(0.5));
        led.plays = Eigen::Vector2i(70, 30);
        CHECK(regret(led) == Approx(15.0));
    }

    TEST_CASE("a single machine is always played") {
        BanditInstance inst;
        inst.costs = {{CostSampler::uniform(0.2, 0.4)}};
        const auto run = play_ucb(inst, 50, Stream(1));
        CHECK(run.ledger.plays[0] == 50);
        CHECK(regret(run.ledger) == 0.0);
    }

    TEST_CASE("identical machines have zero regret") {
        const auto run = play_ucb(two_arms(0.4, 0.4), 300, Stream(2));
        CHECK(run.ledger.plays.sum() == 300);
        CHECK(regret(run.ledger) == 0.0);
    }

    TEST_CASE("each machine is tried once first") {
        BanditInstance inst;
        inst.costs = {{CostSampler::bernoulli(0.9)}, {CostSampler::bernoulli(0.1)}, {CostSampler::bernoulli(0.5)}};
        const auto run = play_ucb(inst, 10, Stream(3));
        CHECK(run.history[0] == 0);
        CHECK(run.history[1] == 1);
        CHECK(run.history[2] == 2);
        CHECK_THROWS_AS(play_ucb(inst, 2, Stream(3)), ConfigError);
    }

    TEST_CASE("risk-adjusted machine values") {
        BanditInstance inst;
        inst.costs = {{CostSampler::bernoulli(0.1), CostSampler::bernoulli(0.9)},
                      {CostSampler::bernoulli(0.5), CostSampler::bernoulli(0.6)}};
        inst.rho = RiskFunctional::var(0.5);
        const Eigen::VectorXd v = inst.values();
        CHECK(v[0] == Approx(0.1));
        CHECK(v[1] == Approx(0.5));
        inst.rho = RiskFunctional::cvar(0.5);
        CHECK(inst.values()[0] == Approx(0.9));
        inst.weights = Eigen::Vector2d(0.8, 0.2);
        CHECK(inst.values()[1] == Approx((0.3 * 0.5 + 0.2 * 0.6) / 0.5));
    }

    TEST_CASE("instance validation") {
        BanditInstance inst;
        inst.costs = {{CostSampler::bernoulli(0.1)}, {CostSampler::bernoulli(0.5), CostSampler::bernoulli(0.5)}};
        CHECK_THROWS_AS(inst.validate(), ConfigError);
        CHECK_THROWS_AS(CostSampler::bernoulli(1.5), ConfigError);
        CHECK_THROWS_AS(CostSampler::discrete(Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(0.5, 0.6)), ConfigError);
    }

    TEST_CASE("regret curves do not depend on the thread count") {
        const auto inst = two_arms(0.3, 0.6);
        const std::vector<long long> cps{50, 200};
        const auto a = regret_curve(inst, cps, 24, Stream(5), 1);
        const auto b = regret_curve(inst, cps, 24, Stream(5), 4);
        for (std::size_t i = 0; i < cps.size(); ++i) {
            CHECK(a[i].mean_regret == b[i].mean_regret);
            CHECK(a[i].std_error == b[i].std_error);
            CHECK(a[i].bound == b[i].bound);
        }
        CHECK(a[1].mean_regret >= a[0].mean_regret);
    }
}

TEST_SUITE("infinite horizon") {
    TEST_CASE("point-mass model matches the hand-solved MDP") {
        // xi = 1 always: state 1 under action 1 costs 1 forever (V = 10);
        // state 0 moves there for 2 + 0.9 * 10 = 11.
        const Environment env = discounted_tiny(Eigen::Vector2d(0.0, 1.0));
        const Posterior pm = point_mass(env.family.space(), 1.0);
        OperatorContext ctx(env, RiskFunctional::expectation(), {{0, pm}, {1, pm}});
        const auto res = value_iteration(ctx, Eigen::Vector2d::Zero(), 1e-9);
        REQUIRE(res.converged);
        CHECK(res.value[0] == Approx(11.0).epsilon(1e-8));
        CHECK(res.value[1] == Approx(10.0).epsilon(1e-8));
        CHECK(res.actions[0] == 1);
        CHECK(res.actions[1] == 1);

        const auto again = value_iteration(ctx, res.value, 1e-6);
        CHECK(again.iterations == 1);
        CHECK(again.converged);
    }

    TEST_CASE("operator laws on a closed universe") {
        const Environment env = discounted_tiny();
        const auto universe = reachable_universe(env, uniform_prior(env.family.space()), 3, 200);
        for (auto rho : {RiskFunctional::expectation(), RiskFunctional::cvar(0.5)}) {
            OperatorContext ctx(env, rho, universe);
            Stream s(13);
            const auto n = ctx.size();
            for (int rep = 0; rep < 20; ++rep) {
                Eigen::VectorXd v(n), w(n);
                for (Eigen::Index i = 0; i < n; ++i) {
                    v[i] = 20.0 * s.uniform();
                    w[i] = v[i] - 5.0 * s.uniform();
                }
                const Eigen::VectorXd tv = bellman_apply(ctx, v), tw = bellman_apply(ctx, w);
                CHECK((tv - tw).lpNorm<Eigen::Infinity>() <=
                      env.discount * (v - w).lpNorm<Eigen::Infinity>() + 1e-10);
                CHECK(((tv - tw).array() >= -1e-10).all());
                const Eigen::VectorXd shifted = bellman_apply(ctx, (v.array() + 3.0).matrix());
                CHECK((shifted - (tv.array() + env.discount * 3.0).matrix()).lpNorm<Eigen::Infinity>() < 1e-10);
            }
        }
    }

    TEST_CASE("configuration errors") {
        const Environment finite = tiny_environment();
        const Posterior mu = uniform_prior(finite.family.space());
        CHECK_THROWS_AS(OperatorContext(finite, RiskFunctional::expectation(), {{0, mu}}), ConfigError);

        Environment env = discounted_tiny();
        CHECK_THROWS_AS(OperatorContext(env, RiskFunctional::expectation(), {{0, mu}, {0, mu}}), ConfigError);
        CHECK_THROWS_AS(OperatorContext(env, RiskFunctional::expectation(), {}), ConfigError);

        OperatorOptions strict;
        strict.project = false;
        OperatorContext ctx(env, RiskFunctional::expectation(), {{0, mu}, {1, mu}}, strict);
        CHECK_THROWS_AS(bellman_apply(ctx, Eigen::Vector2d::Zero()), ConfigError);

        OperatorContext loose(env, RiskFunctional::expectation(), {{0, mu}, {1, mu}});
        CHECK_NOTHROW(bellman_apply(loose, Eigen::Vector2d::Zero()));
        CHECK(loose.projections() > 0);
    }

    TEST_CASE("nso backend reuses its draws") {
        const Environment env = discounted_tiny();
        const auto universe = reachable_universe(env, uniform_prior(env.family.space()), 2, 50);
        OperatorOptions o;
        o.backend = Backend::nso;
        o.budget = {8, 8};
        OperatorContext ctx(env, RiskFunctional::var(0.5), universe, o);
        const Eigen::VectorXd v = Eigen::VectorXd::Constant(ctx.size(), 1.0);
        CHECK(bellman_apply(ctx, v) == bellman_apply(ctx, v));
    }
}
