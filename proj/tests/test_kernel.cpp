#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "aoi/kernel.hpp"
#include "aoi/sim.hpp"
#include "support.hpp"

using namespace aoi;

namespace {

SystemState st(std::vector<int> v) {
    SystemState s;
    s.receiver_aoi = v.back();
    v.pop_back();
    s.buffer = std::move(v);
    return s;
}

using Law = std::map<std::vector<int>, double>;

Law law(const std::vector<Successor>& succ) {
    Law out;
    for (const auto& s : succ) {
        if (s.prob == 0.0) continue;
        auto key = s.state.buffer;
        key.push_back(s.state.receiver_aoi);
        out[key] += s.prob;
    }
    return out;
}

void check_law(const Law& got, const Law& want) {
    CHECK(got.size() == want.size());
    for (const auto& [k, p] : want) {
        const auto it = got.find(k);
        REQUIRE_MESSAGE(it != got.end(), "missing successor");
        CHECK(it->second == doctest::Approx(p).epsilon(1e-15));
    }
}

}  // namespace

TEST_CASE("feasible_actions") {
    CHECK(feasible_actions(st({-1, -1, 4}), 2) == std::vector<int>{0});
    CHECK(feasible_actions(st({-1, 3, 7}), 2) == std::vector<int>{0, 1});
    CHECK(feasible_actions(st({2, 5, 9}), 2) == std::vector<int>{0, 1, 2});
}

TEST_CASE("empty buffer") {
    check_law(law(transitions_case1(st({-1, 4}), 0.5)), {{{0, 5}, 0.5}, {{-1, 5}, 0.5}});
    check_law(law(transitions_case1(st({-1, -1, 2}), 0.3)), {{{-1, 0, 3}, 0.3}, {{-1, -1, 3}, 0.7}});
    check_law(law(transitions_case1(st({-1, 1}), 1.0)), {{{0, 2}, 1.0}});
    CHECK_THROWS_AS(transitions_case1(st({-1, 2, 5}), 0.5), std::invalid_argument);
}

TEST_CASE("partially filled buffer") {
    check_law(law(transitions_case2(st({-1, 2, 5}), 1, 0.4)), {{{-1, 0, 3}, 0.4}, {{-1, -1, 3}, 0.6}});
    check_law(law(transitions_case2(st({-1, 2, 5}), 0, 0.4)), {{{0, 3, 6}, 0.4}, {{-1, 3, 6}, 0.6}});
    check_law(law(transitions_case2(st({-1, 1, 4, 9}), 1, 0.5)),
              {{{-1, 0, 2, 5}, 0.5}, {{-1, -1, 2, 5}, 0.5}});
    CHECK_THROWS_AS(transitions_case2(st({-1, 2, 5}), 2, 0.4), std::invalid_argument);
}

TEST_CASE("full buffer with hidden packets") {
    check_law(law(transitions_case3(st({2, 4}), 1, 0.5)),
              {{{2, 3}, 0.5}, {{1, 3}, 0.25}, {{0, 3}, 0.125}, {{-1, 3}, 0.125}});
    check_law(law(transitions_case3(st({0, 3}), 1, 0.6)), {{{0, 1}, 0.6}, {{-1, 1}, 0.4}});
    check_law(law(transitions_case3(st({2, 4}), 0, 0.5)), {{{3, 5}, 1.0}});
    CHECK_THROWS_AS(transitions_case3(st({-1, 2, 5}), 1, 0.5), std::invalid_argument);
}

TEST_CASE("full buffer with no hidden slot reduces to the partial-buffer law") {
    // (0, 3, 7) holds exactly the two visible packets; serving both matches the
    // shape of a three-wide buffer holding the same two packets.
    for (double lambda : {0.2, 0.5, 0.8})
        for (int rate = 0; rate <= 2; ++rate) {
        const auto full = law(transitions_case3(st({0, 3, 7}), rate, lambda));
        const auto partial = law(transitions_case2(st({-1, 0, 3, 7}), rate, lambda));
        Law trimmed;
        for (const auto& [k, p] : partial) trimmed[{k[1], k[2], k[3]}] += p;
        check_law(full, trimmed);
        }
}

TEST_CASE("receiver-AoI follows the served packet") {
    for (int S = 1; S <= 3; ++S) {
        const StateSpace sp(6, S);
        for (std::size_t i = 0; i < sp.regular_count(); ++i) {
            const auto& s0 = sp.state_at(i);
            for (int s : feasible_actions(s0, S)) {
                const int expect = s == 0 ? s0.receiver_aoi + 1 : s0.oldest(s) + 1;
                for (const auto& succ : transitions(s0, s, 0.35)) CHECK(succ.state.receiver_aoi == expect);
            }
        }
    }
}

TEST_CASE("kernel rows are stochastic") {
    double worst = 0.0;
    for (int S = 1; S <= 3; ++S)
        for (int M = 1; M <= 8; ++M)
            for (double lambda : {0.1, 0.25, 0.5, 0.75, 0.9}) {
                const TransitionKernel k(test::space(M, S), lambda);
                for (std::size_t i = 0; i < k.space().size(); ++i) {
                    CHECK_FALSE(k.rows(i).empty());
                    for (const auto& row : k.rows(i)) {
                        double sum = 0.0;
                        for (const auto& t : row.transitions) {
                            CHECK(t.target < k.space().size());
                            sum += t.prob;
                        }
                        worst = std::max(worst, std::abs(sum - 1.0));
                    }
                }
            }
    CHECK(worst <= 1e-12);
}

TEST_CASE("truncation redirects to the aggregate tails") {
    const TransitionKernel k(test::space(3, 1), 0.5);
    const auto& sp = k.space();
    const auto from = sp.index_of(st({-1, 3}));
    REQUIRE(from);
    const auto* row = k.row(*from, 0);
    REQUIRE(row);
    std::map<std::size_t, double> got;
    for (const auto& t : row->transitions) got[t.target] += t.prob;
    CHECK(got == std::map<std::size_t, double>{{sp.tail_empty(), 0.5}, {sp.tail_one(), 0.5}});

    // Tail rows: empty tail waits for an arrival, the one-packet tail is served at once.
    const auto& te = k.rows(sp.tail_empty());
    REQUIRE(te.size() == 1);
    got.clear();
    for (const auto& t : te[0].transitions) got[t.target] += t.prob;
    CHECK(got == std::map<std::size_t, double>{{sp.tail_empty(), 0.5}, {sp.tail_one(), 0.5}});
    const auto& t1 = k.rows(sp.tail_one());
    REQUIRE(t1.size() == 1);
    CHECK(t1[0].action == 1);
    got.clear();
    for (const auto& t : t1[0].transitions) got[t.target] += t.prob;
    CHECK(got == std::map<std::size_t, double>{{*sp.index_of(st({-1, 1})), 0.5}, {*sp.index_of(st({0, 1})), 0.5}});

    // Only the forced action remains at the order.
    const auto at_order = sp.index_of(st({1, 3}));
    REQUIRE(at_order);
    REQUIRE(k.rows(*at_order).size() == 1);
    CHECK(k.rows(*at_order)[0].action == 1);
}

TEST_CASE("non-tail rows stay within one level above the source") {
    const TransitionKernel k(test::space(7, 2), 0.45);
    const auto& sp = k.space();
    for (std::size_t i = 0; i < sp.regular_count(); ++i)
        for (const auto& row : k.rows(i))
            for (const auto& t : row.transitions)
                if (sp.kind(t.target) == StateKind::regular) CHECK(sp.level(t.target) <= sp.level(i) + 1);
}

TEST_CASE("aggregate tails match a hard truncation") {
    const auto model = test::unit_model(0.5);
    const auto sp = test::space(6, 1);
    const TransitionKernel k(sp, 0.5);
    const auto policy = Policy::always_transmit(sp, 1);
    const auto pi = stationary_distribution(k, policy, model.channel);
    const auto hard = test::hard_truncation(policy, model.channel, model.power, 0.5, 6 + 60);
    CHECK(test::tail_tv_distance(hard, *sp, pi) <= 1e-9);
}

TEST_CASE("stationary distribution") {
    SUBCASE("random policy against a dense null-space solve") {
        const auto model = test::unit_model(0.4);
        const auto sp = test::space(5, 1);
        const TransitionKernel k(sp, 0.4);
        const auto policy = test::random_policy(sp, 1, 3);
        const auto pi = stationary_distribution(k, policy, model.channel);
        const auto chain = policy_chain(k, policy, model.channel);
        std::vector<std::vector<std::pair<std::size_t, double>>> rows(chain.size);
        for (std::size_t i = 0; i < chain.size; ++i)
            for (const auto& t : chain.rows[i]) rows[i].emplace_back(t.target, t.prob);
        const auto ref = test::dense_stationary(rows);
        double sum = 0.0;
        for (std::size_t i = 0; i < pi.size(); ++i) {
            CHECK(pi[i] >= 0.0);
            CHECK(std::abs(pi[i] - ref[i]) <= 1e-10);
            sum += pi[i];
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        // Residual of pi P = pi.
        std::vector<double> next(pi.size(), 0.0);
        for (std::size_t i = 0; i < chain.size; ++i)
            for (const auto& t : chain.rows[i]) next[t.target] += pi[i] * t.prob;
        for (std::size_t i = 0; i < pi.size(); ++i) CHECK(std::abs(next[i] - pi[i]) <= 1e-10);
    }
    SUBCASE("never transmitting raises the mean receiver-AoI") {
        const auto model = test::shannon_model(0.5, 2, 3);
        const auto sp = test::space(6, 2);
        const TransitionKernel k(sp, 0.5);
        auto mean_level = [&](const Policy& p) {
            const auto pi = stationary_distribution(k, p, model.channel);
            double m = 0.0;
            for (std::size_t i = 0; i < sp->size(); ++i) m += pi[i] * sp->state_at(i).receiver_aoi;
            return m;
        };
        const auto never = Policy::never_transmit(sp, 3);
        const auto pi = stationary_distribution(k, never, model.channel);
        CHECK(pi[sp->tail_empty()] + pi[sp->tail_one()] > 0.0);
        CHECK(mean_level(never) > mean_level(Policy::always_transmit(sp, 3)) + 1.0);
    }
    SUBCASE("always transmitting concentrates on low receiver-AoI") {
        const auto model = test::unit_model(0.5);
        const auto sp = test::space(4, 1);
        const TransitionKernel k(sp, 0.5);
        const auto policy = Policy::always_transmit(sp, 1);
        const auto pi = stationary_distribution(k, policy, model.channel);
        double low = 0.0;
        for (std::size_t i = 0; i < sp->regular_count(); ++i)
            if (sp->level(i) <= 2) low += pi[i];
        CHECK(low > 0.7);
        // Occupancy against simulation within three standard errors.
        SimOptions so;
        so.slots = 2'000'000;
        so.count_transitions = true;
        so.seed = 5;
        const auto sim = simulate(model, policy, so);
        double visits = 0.0;
        for (auto v : sim.visits) visits += static_cast<double>(v);
        for (std::size_t i = 0; i < sp->size(); ++i) {
            const double freq = static_cast<double>(sim.visits[i]) / visits;
            // Batch-free bound: inflate the binomial error for autocorrelation.
            const double se = std::sqrt(pi[i] * (1 - pi[i]) / visits) * 4.0;
            CHECK_MESSAGE(std::abs(freq - pi[i]) <= 3 * se + 1e-12, "state " << i);
        }
    }
}

TEST_CASE("closed classes are counted") {
    PolicyChain chain;
    chain.size = 3;
    chain.rows = {{{0, 1.0}}, {{1, 1.0}}, {{0, 0.5}, {1, 0.5}}};
    CHECK(closed_class_count(chain) == 2);
    chain.rows[1] = {{0, 1.0}};
    CHECK(closed_class_count(chain) == 1);
}

TEST_CASE("fault injection hook breaks stochasticity") {
    TransitionKernel k(test::space(3, 1), 0.5);
    k.corrupt_row_for_testing(0, 0, 1.01);
    double sum = 0.0;
    for (const auto& t : k.rows(0)[0].transitions) sum += t.prob;
    CHECK(std::abs(sum - 1.0) > 1e-3);
    CHECK_THROWS_AS(k.corrupt_row_for_testing(0, 1, 2.0), std::invalid_argument);
}

TEST_CASE("outage is rejected by the analytic chain") {
    ChannelModel ch;
    ch.states = 1;
    ch.alpha = {0.9};
    ch.alpha_outage = 0.1;
    CHECK_THROWS_AS(require_no_outage(ch, "test"), std::invalid_argument);
}
