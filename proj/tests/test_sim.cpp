#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "aoi/optimizer.hpp"
#include "aoi/sim.hpp"
#include "support.hpp"

using namespace aoi;

namespace {

SimOptions slots(std::uint64_t n, std::uint64_t seed = 1) {
    SimOptions o;
    o.slots = n;
    o.seed = seed;
    return o;
}

}  // namespace

TEST_CASE("rare arrivals spend almost nothing") {
    const auto model = test::shannon_model(1e-6, 1, 3);
    const auto sp = test::space(4, 1);
    const auto st = simulate(model, Policy::always_transmit(sp, 3), slots(200'000));
    CHECK(st.power_mean < 1e-3 * model.power(0, 1));
    CHECK(st.aoi_mean > 1000.0);
}

TEST_CASE("unit cost per packet spends the arrival rate") {
    const auto model = test::unit_model(0.5);
    const auto sp = test::space(5, 1);
    const auto st = simulate(model, Policy::always_transmit(sp, 1), slots(1'000'000, 3));
    CHECK(st.power_ci > 0.0);
    CHECK(std::abs(st.power_mean - 0.5) <= 2 * st.power_ci);
    CHECK(st.slots == 990'000);
}

TEST_CASE("simulation agrees with the analytic chain") {
    for (int S : {1, 2}) {
        const auto model = test::shannon_model(0.5, S, 3);
        const auto sp = test::space(6, S);
        const TransitionKernel k(sp, 0.5);
        const auto policy = test::random_policy(sp, 3, 17 + S);
        const auto exact = evaluate_policy(k, policy, model.channel, model.power);
        const auto st = replicate(model, policy, 4, 100, slots(1'000'000), 4);
        CHECK_MESSAGE(std::abs(st.aoi_mean - exact.aoi) <= 3 * st.aoi_ci, "S=" << S);
        CHECK_MESSAGE(std::abs(st.power_mean - exact.power) <= 3 * st.power_ci, "S=" << S);
    }
}

TEST_CASE("empirical transitions follow the kernel") {
    const auto model = test::unit_model(0.4, 2, {0.0, 1.0, 3.0});
    const auto sp = test::space(5, 2);
    const TransitionKernel k(sp, 0.4);
    const auto policy = test::random_policy(sp, 1, 8);
    SimOptions o = slots(500'000, 9);
    o.count_transitions = true;
    const auto st = simulate(model, policy, o);
    int checked = 0;
    for (const auto& [key, targets] : st.transitions) {
        const std::size_t state = key / 3;
        const int action = static_cast<int>(key % 3);
        double n = 0.0;
        for (const auto& [t, c] : targets) n += static_cast<double>(c);
        if (n < 5000) continue;
        const auto* row = k.row(state, action);
        REQUIRE(row);
        std::map<std::size_t, double> p;
        for (const auto& t : row->transitions) p[t.target] += t.prob;
        for (const auto& [t, c] : targets) CHECK(p.count(t) == 1);
        for (const auto& [t, q] : p) {
            const auto it = targets.find(t);
            const double freq = it == targets.end() ? 0.0 : static_cast<double>(it->second) / n;
            CHECK(std::abs(freq - q) <= 5 * std::sqrt(q * (1 - q) / n) + 1e-12);
        }
        ++checked;
    }
    CHECK(checked >= 10);
}

TEST_CASE("channel state frequencies") {
    SystemConfig cfg;
    cfg.lambda = 0.3;
    cfg.channel.states = 3;
    cfg.channel.mean_gain = 1e-13;
    cfg.channel.delta = 0.2e-13;  // outage mass 1 - e^{-0.2}
    const auto model = validate_config(cfg);
    REQUIRE(model.channel.alpha_outage > 0.1);
    const auto sp = test::space(5, 1);
    const auto st = simulate(model, Policy::always_transmit(sp, 3), slots(400'000, 4));
    REQUIRE(st.channel_counts.size() == 4);
    const double n = static_cast<double>(st.slots);
    for (int w = 0; w <= 3; ++w) {
        const double p = w < 3 ? model.channel.alpha[w] : model.channel.alpha_outage;
        const double freq = static_cast<double>(st.channel_counts[w]) / n;
        CHECK_MESSAGE(std::abs(freq - p) <= 3 * std::sqrt(p * (1 - p) / n), "channel " << w);
    }
}

TEST_CASE("replications") {
    const auto model = test::shannon_model(0.4, 1, 3);
    const auto sp = test::space(6, 1);
    const auto policy = test::random_policy(sp, 3, 2);
    const auto o = slots(100'000, 10);

    const auto one = replicate(model, policy, 1, 10, o);
    const auto direct = simulate(model, policy, o);
    CHECK(one.aoi_mean == direct.aoi_mean);
    CHECK(one.power_mean == direct.power_mean);
    CHECK(one.aoi_ci == direct.aoi_ci);

    const auto pooled = replicate(model, policy, 3, 10, o, 3);
    CHECK(pooled.replications == 3);
    CHECK(pooled.seed == 10);
    double mean = 0.0;
    for (std::uint64_t s : {10, 11, 12}) mean += simulate(model, policy, slots(100'000, s)).aoi_mean / 3;
    CHECK(pooled.aoi_mean == doctest::Approx(mean).epsilon(1e-12));

    const auto many = replicate(model, policy, 16, 10, o, 4);
    CHECK(many.aoi_ci < direct.aoi_ci);
    CHECK(replicate(model, policy, 16, 10, o, 1).aoi_mean == many.aoi_mean);
}

TEST_CASE("same seed, same run") {
    const auto model = test::shannon_model(0.6, 2, 3);
    const auto sp = test::space(5, 2);
    const auto policy = test::random_policy(sp, 3, 4);
    const auto a = simulate(model, policy, slots(50'000, 77));
    const auto b = simulate(model, policy, slots(50'000, 77));
    const auto c = simulate(model, policy, slots(50'000, 78));
    CHECK(a.aoi_mean == b.aoi_mean);
    CHECK(a.power_mean == b.power_mean);
    CHECK(a.channel_counts == b.channel_counts);
    CHECK(a.aoi_mean != c.aoi_mean);
}

TEST_CASE("trace rows") {
    const auto model = test::shannon_model(0.5, 2, 3);
    const auto sp = test::space(4, 2);
    std::ostringstream trace;
    SimOptions o = slots(1000, 5);
    o.trace = &trace;
    simulate(model, Policy::always_transmit(sp, 3), o);
    std::istringstream in(trace.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "slot,a,c,s,q,A_r");
    int rows = 0;
    long prev_q = 0;
    while (std::getline(in, line)) {
        long slot, a, c, s, q, ar;
        char sep;
        std::istringstream row(line);
        row >> slot >> sep >> a >> sep >> c >> sep >> s >> sep >> q >> sep >> ar;
        REQUIRE_FALSE(row.fail());
        CHECK(slot == rows);
        CHECK((a == 0 || a == 1));
        CHECK((c >= 1 && c <= 3));
        CHECK((s >= 0 && s <= std::min<long>(q, 2)));
        CHECK(ar >= 1);
        if (rows > 0) CHECK(q <= prev_q + 1);
        prev_q = q - s;
        ++rows;
    }
    CHECK(rows == 1000);
}

TEST_CASE("errors") {
    const auto model = test::shannon_model(0.9, 1, 3);
    SimOptions o = slots(10'000);
    o.max_queue = 3;
    CHECK_THROWS_AS(simulate(model, Policy::threshold(test::space(40, 1), 3, 40), o), std::runtime_error);
    CHECK_THROWS_AS(simulate(model, Policy::always_transmit(test::space(4, 2), 3), slots(10)), std::invalid_argument);
    CHECK_THROWS_AS(simulate(model, Policy::always_transmit(test::space(4, 1), 1), slots(10)), std::invalid_argument);
    CHECK_THROWS_AS(simulate(model, Policy::always_transmit(test::space(4, 1), 3), slots(0)), std::invalid_argument);
    CHECK_THROWS_AS(replicate(model, Policy::always_transmit(test::space(4, 1), 3), 0, 1, slots(10)),
                    std::invalid_argument);
}

TEST_CASE("Student-t quantiles") {
    CHECK(t_quantile_95(1) == doctest::Approx(12.7062047362).epsilon(1e-9));
    CHECK(t_quantile_95(10) == doctest::Approx(2.2281388520).epsilon(1e-9));
    CHECK(t_quantile_95(100000) == doctest::Approx(1.959963985).epsilon(1e-4));
    CHECK_THROWS_AS(t_quantile_95(0), std::invalid_argument);
}
