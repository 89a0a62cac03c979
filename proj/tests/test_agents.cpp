#include <catch2/catch_amalgamated.hpp>

#include "hierts/agents.hpp"

using namespace hierts;

namespace {

ModelConfig basis_model(double sigma_q, double sigma_0, double sigma, int m, int n,
                        RealVector mu_q) {
    const int d = static_cast<int>(mu_q.size());
    return ModelConfig(std::move(mu_q),
                       CovMatrix{Matrix(sigma_q * sigma_q * Matrix::Identity(d, d))},
                       CovMatrix{Matrix(sigma_0 * sigma_0 * Matrix::Identity(d, d))}, sigma, m,
                       n, 1, ActionSet::standard_basis(d));
}

}  // namespace

TEST_CASE("hierts picks the true optimum under degenerate priors", "[agents]") {
    RealVector theta(3);
    theta << 0.6, 0.2, -0.1;  // clear gaps
    const ModelConfig model = basis_model(1e-4, 1e-4, 0.5, 1, 10, theta);
    HierTs agent(model);
    Rng rng = derive_rng(31, {0});
    int hits = 0;
    const int rounds = 2000;
    for (int t = 0; t < rounds; ++t) {
        if (agent.act({0}, rng)[0] == 0) ++hits;
    }
    REQUIRE(hits >= static_cast<int>(rounds * 0.999));
}

TEST_CASE("one hyper draw per round regardless of how many tasks act", "[agents]") {
    const ModelConfig model = basis_model(0.5, 0.3, 0.5, 4, 10, RealVector::Zero(2));
    HierTs agent(model);
    const int d = 2;

    for (const std::vector<int>& tasks :
         {std::vector<int>{2}, std::vector<int>{0, 1}, std::vector<int>{0, 1, 2, 3}}) {
        Rng acting = derive_rng(31, {1});
        Rng counter = derive_rng(31, {1});
        agent.act(tasks, acting);
        // 2 raw draws per normal; d normals for mu, d per task parameter
        counter.discard(2 * d * (1 + tasks.size()));
        REQUIRE(acting() == counter());
    }
}

TEST_CASE("an empty round consumes nothing and changes nothing", "[agents]") {
    const ModelConfig model = basis_model(0.5, 0.3, 0.5, 2, 10, RealVector::Zero(2));
    HierTs agent(model);
    Rng rng = derive_rng(31, {2});
    Rng untouched = rng;
    REQUIRE(agent.act({}, rng).empty());
    REQUIRE(rng() == untouched());

    const HyperPosterior before = agent.hyper();
    agent.update({});
    REQUIRE(before.mean == agent.hyper().mean);
    REQUIRE(before.cov.matrix() == agent.hyper().cov.matrix());
}

TEST_CASE("hierts update matches a direct posterior recomputation", "[agents]") {
    const ModelConfig model = basis_model(0.5, 0.3, 0.5, 3, 10, RealVector::Zero(2));
    HierTs agent(model);
    agent.update({{1, 0, 0.7}});

    std::vector<TaskStats> stats(3, TaskStats(2));
    stats[1] = update_task_stats(stats[1], model.action_set[0], 0.7, model.sigma);
    const HyperPosterior expected =
        hyper_posterior_karmed(model.mu_q, 0.5, 0.3, model.sigma, stats);
    REQUIRE((agent.hyper().mean - expected.mean).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((agent.hyper().cov.matrix() - expected.cov.matrix()).cwiseAbs().maxCoeff() < 1e-12);

    REQUIRE_THROWS_AS(agent.update({{7, 0, 0.0}}), UnknownTask);
}

TEST_CASE("within-round observation order does not matter", "[agents]") {
    const ModelConfig model = basis_model(0.5, 0.3, 0.5, 4, 10, RealVector::Zero(2));
    HierTs forward(model);
    HierTs backward(model);
    const std::vector<Observation> obs = {{0, 0, 0.3}, {1, 1, -0.2}, {2, 0, 0.9}, {3, 1, 0.1}};
    std::vector<Observation> reversed(obs.rbegin(), obs.rend());
    forward.update(obs);
    backward.update(reversed);
    REQUIRE(forward.hyper().mean == backward.hyper().mean);
    REQUIRE(forward.hyper().cov.matrix() == backward.hyper().cov.matrix());
}

TEST_CASE("two tasks in one round share the hyper draw", "[agents]") {
    // With a huge hyper prior and tiny task prior, both sampled task
    // parameters sit on the same mu draw, so both tasks pick the same arm.
    RealVector mu_q = RealVector::Zero(2);
    const ModelConfig model(mu_q, CovMatrix{Matrix(100.0 * Matrix::Identity(2, 2))},
                            CovMatrix{Matrix(1e-8 * Matrix::Identity(2, 2))}, 0.5, 2, 10, 2,
                            ActionSet::standard_basis(2));
    HierTs agent(model);
    Rng rng = derive_rng(31, {3});
    for (int t = 0; t < 200; ++t) {
        const std::vector<int> acts = agent.act({0, 1}, rng);
        REQUIRE(acts[0] == acts[1]);
    }
}

TEST_CASE("oracle agent ignores other tasks' data", "[agents]") {
    const ModelConfig model = basis_model(0.5, 0.3, 0.5, 2, 10, RealVector::Zero(2));
    RealVector mu_star(2);
    mu_star << 0.2, -0.4;

    OracleTs isolated(model, mu_star);
    OracleTs polluted(model, mu_star);
    for (int i = 0; i < 8; ++i) polluted.update({{1, i % 2, 0.5 * i}});

    Rng rng_a = derive_rng(31, {4});
    Rng rng_b = derive_rng(31, {4});
    for (int t = 0; t < 50; ++t) {
        REQUIRE(isolated.act({0}, rng_a) == polluted.act({0}, rng_b));
    }
}

TEST_CASE("hierts with a collapsed hyper prior behaves like the oracle", "[agents]") {
    RealVector mu_star(2);
    mu_star << 0.25, 0.1;
    const ModelConfig model(mu_star, CovMatrix{Matrix(1e-8 * Matrix::Identity(2, 2))},
                            CovMatrix{Matrix(0.04 * Matrix::Identity(2, 2))}, 0.5, 1, 10, 1,
                            ActionSet::standard_basis(2));
    HierTs hier(model);
    OracleTs oracle(model, mu_star);

    Rng rng_h = derive_rng(31, {5});
    Rng rng_o = derive_rng(31, {6});
    const int rounds = 20000;
    std::array<int, 2> hier_counts{0, 0}, oracle_counts{0, 0};
    for (int t = 0; t < rounds; ++t) {
        ++hier_counts[static_cast<std::size_t>(hier.act({0}, rng_h)[0])];
        ++oracle_counts[static_cast<std::size_t>(oracle.act({0}, rng_o)[0])];
    }
    for (int arm = 0; arm < 2; ++arm) {
        const double hier_rate = static_cast<double>(hier_counts[arm]) / rounds;
        const double oracle_rate = static_cast<double>(oracle_counts[arm]) / rounds;
        REQUIRE(std::abs(hier_rate - oracle_rate) < 0.02);
    }
}

TEST_CASE("marginal agent samples from the marginal prior and stays per-task", "[agents]") {
    RealVector mu_q(2);
    mu_q << 0.1, -0.3;
    const ModelConfig model = basis_model(0.5, 0.3, 0.5, 2, 10, mu_q);
    MarginalTs agent(model);

    // with no data, empirical mean of sampled values matches mu_q via arm choice
    // frequencies against a direct sampler from N(mu_q, Sigma_q + Sigma_0)
    const CovMatrix marginal{Matrix(0.34 * Matrix::Identity(2, 2))};
    Rng rng_agent = derive_rng(31, {7});
    Rng rng_direct = derive_rng(31, {8});
    const int rounds = 20000;
    std::array<int, 2> agent_counts{0, 0}, direct_counts{0, 0};
    for (int t = 0; t < rounds; ++t) {
        ++agent_counts[static_cast<std::size_t>(agent.act({0}, rng_agent)[0])];
        const RealVector theta = sample_mvn(mu_q, marginal, rng_direct);
        ++direct_counts[theta(0) >= theta(1) ? 0 : 1];
    }
    for (int arm = 0; arm < 2; ++arm) {
        REQUIRE(std::abs(agent_counts[arm] - direct_counts[arm]) <
                0.02 * static_cast<double>(rounds));
    }

    // updating task 1 leaves task 0's sampling untouched
    MarginalTs other(model);
    for (int i = 0; i < 6; ++i) other.update({{1, 0, 1.0}});
    Rng rng_a = derive_rng(31, {9});
    Rng rng_b = derive_rng(31, {9});
    for (int t = 0; t < 50; ++t) REQUIRE(agent.act({0}, rng_a) == other.act({0}, rng_b));
}

TEST_CASE("forced exploration constants for basis action sets", "[agents]") {
    const ModelConfig model = basis_model(0.5, 0.3, 0.5, 2, 10, RealVector::Zero(2));
    const std::vector<int> basis = select_spanning_basis(model.action_set);
    ForcedExploration wrapped(std::make_unique<HierTs>(model), basis, model.action_set, 2);
    REQUIRE(wrapped.eta() == Catch::Approx(1.0).epsilon(1e-12));

    RealVector half_e0(2), half_e1(2);
    half_e0 << 0.5, 0.0;
    half_e1 << 0.0, 0.5;
    const ActionSet scaled = ActionSet::finite({half_e0, half_e1});
    RealVector mu_q = RealVector::Zero(2);
    const ModelConfig scaled_model(mu_q, CovMatrix{Matrix::Identity(2, 2)},
                                   CovMatrix{Matrix::Identity(2, 2)}, 1.0, 2, 10, 1, scaled);
    ForcedExploration scaled_wrap(std::make_unique<HierTs>(scaled_model), {0, 1}, scaled, 2);
    REQUIRE(scaled_wrap.eta() == Catch::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("a non-spanning basis is rejected", "[agents]") {
    RealVector e0(2), also_e0(2);
    e0 << 1.0, 0.0;
    also_e0 << 0.5, 0.0;
    const ActionSet degenerate = ActionSet::finite({e0, also_e0});
    REQUIRE_THROWS_AS(select_spanning_basis(degenerate), BasisDoesNotSpan);

    RealVector mu_q = RealVector::Zero(2);
    const ModelConfig model(mu_q, CovMatrix{Matrix::Identity(2, 2)},
                            CovMatrix{Matrix::Identity(2, 2)}, 1.0, 2, 10, 1, degenerate);
    REQUIRE_THROWS_AS(
        ForcedExploration(std::make_unique<HierTs>(model), {0, 1}, degenerate, 2),
        BasisDoesNotSpan);
}

TEST_CASE("forced plays cover the basis before delegation", "[agents]") {
    const ModelConfig model = basis_model(0.5, 0.3, 0.5, 2, 10, RealVector::Zero(2));
    auto owned = std::make_unique<HierTs>(model);
    HierTs* hier = owned.get();
    ForcedExploration agent(std::move(owned), {0, 1}, model.action_set, 2);

    Rng rng = derive_rng(31, {10});
    Rng noise = derive_rng(31, {11});
    for (int t = 0; t < 5; ++t) {
        const std::vector<int> acts = agent.act({0}, rng);
        if (t < 2) REQUIRE(acts[0] == t);  // basis actions in order
        agent.update({{0, acts[0], standard_normal(noise)}});
    }
    // after d forced plays, lambda_min(G) >= eta / sigma^2
    const double floor = agent.eta() / (model.sigma * model.sigma);
    REQUIRE(lambda_min(hier->stats(0).gram()) >= floor * (1.0 - 1e-12));
}

TEST_CASE("identical seeds give identical action sequences", "[agents]") {
    const ModelConfig model = basis_model(0.5, 0.3, 0.5, 3, 10, RealVector::Zero(2));
    HierTs first(model);
    HierTs second(model);
    Rng rng_a = derive_rng(31, {12});
    Rng rng_b = derive_rng(31, {12});
    Rng noise_a = derive_rng(31, {13});
    Rng noise_b = derive_rng(31, {13});
    for (int t = 0; t < 40; ++t) {
        const std::vector<int> tasks = {t % 3};
        const std::vector<int> acts_a = first.act(tasks, rng_a);
        const std::vector<int> acts_b = second.act(tasks, rng_b);
        REQUIRE(acts_a == acts_b);
        first.update({{tasks[0], acts_a[0], standard_normal(noise_a)}});
        second.update({{tasks[0], acts_b[0], standard_normal(noise_b)}});
    }
}

TEST_CASE("two-stage sampling matches the marginal posterior", "[agents]") {
    // small-sample version of the law: empirical mean/cov of theta draws at a
    // fixed history equals the marginal posterior within a few standard errors
    const ModelConfig model = basis_model(0.5, 0.3, 0.5, 2, 10, RealVector::Zero(2));
    HierTs agent(model);
    Rng noise = derive_rng(31, {14});
    for (int i = 0; i < 6; ++i) {
        agent.update({{i % 2, i % 2, 0.4 + 0.3 * standard_normal(noise)}});
    }

    std::vector<TaskStats> stats;
    for (int s = 0; s < 2; ++s) stats.push_back(agent.stats(s));
    const MarginalPosterior expected =
        marginal_posterior(agent.hyper(), model.sigma_0, stats[0]);

    Rng rng = derive_rng(31, {15});
    const int draws = 20000;
    RealVector sum = RealVector::Zero(2);
    Matrix sum_sq = Matrix::Zero(2, 2);
    for (int i = 0; i < draws; ++i) {
        const RealVector mu = sample_mvn(agent.hyper().mean, agent.hyper().cov, rng);
        const RealVector theta = agent.sample_task_parameter(0, mu, rng);
        sum += theta;
        sum_sq += theta * theta.transpose();
    }
    const RealVector mean = sum / draws;
    const Matrix cov = sum_sq / draws - mean * mean.transpose();
    for (int i = 0; i < 2; ++i) {
        const double se = std::sqrt(expected.cov.matrix()(i, i) / draws);
        REQUIRE(std::abs(mean(i) - expected.mean(i)) < 4.0 * se);
        for (int j = 0; j < 2; ++j) {
            const double cov_se = std::sqrt((expected.cov.matrix()(i, i) *
                                                 expected.cov.matrix()(j, j) +
                                             expected.cov.matrix()(i, j) *
                                                 expected.cov.matrix()(i, j)) /
                                            draws);
            REQUIRE(std::abs(cov(i, j) - expected.cov.matrix()(i, j)) < 4.0 * cov_se);
        }
    }
}
