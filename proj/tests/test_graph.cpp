#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "funs/graph.hpp"

using namespace funs;

TEST_CASE("build_mask basics") {
    CHECK(build_mask({0}, 3) == std::vector<double>{1, 0, 0});
    CHECK(build_mask({}, 3) == std::vector<double>{0, 0, 0});

    const auto m = build_mask({0, 1, 2}, 3);
    CHECK(m == std::vector<double>{1, 1, 1});
    const auto mbar = complement_mask(m);
    for (size_t i = 0; i < m.size(); ++i) CHECK(m[i] + mbar[i] == 1.0);

    CHECK_THROWS_AS(build_mask({3}, 3), std::out_of_range);
}

TEST_CASE("apply_mask zeroing and idempotence") {
    FeatureSequence x(4, 3, 2);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2, 2);
    for (double& v : x.values) v = u(rng);

    CHECK(apply_mask(x, {1, 1, 1}).values == x.values);

    const auto zeroed = apply_mask(x, {0, 0, 0});
    for (double v : zeroed.values) CHECK(v == 0.0);

    // single masked node: its column zero everywhere, others bit-identical
    const auto one = apply_mask(x, {1, 0, 1});
    for (int t = 0; t < x.T; ++t)
        for (int i = 0; i < x.n; ++i)
            for (int f = 0; f < x.d; ++f) {
                if (i == 1)
                    CHECK(one.at(t, i, f) == 0.0);
                else
                    CHECK(one.at(t, i, f) == x.at(t, i, f));
            }

    const auto twice = apply_mask(one, {1, 0, 1});
    CHECK(twice.values == one.values);

    CHECK_THROWS_AS(apply_mask(x, {1, 0}), DimensionError);
}

TEST_CASE("split_nodes counts and determinism") {
    const auto p = split_nodes(100, 0.5, 42);
    CHECK(p.v_in.size() == 25);
    CHECK(p.v_opt.size() == 25);
    CHECK(p.v_val.size() == 25);
    CHECK(p.v_test.size() == 25);

    const auto p2 = split_nodes(100, 0.5, 42);
    CHECK(p.v_in == p2.v_in);
    CHECK(p.v_opt == p2.v_opt);
    CHECK(p.v_val == p2.v_val);
    CHECK(p.v_test == p2.v_test);
    CHECK(p.hash() == p2.hash());
    CHECK(p.hash() != split_nodes(100, 0.5, 43).hash());

    // n=10, share=0.9 leaves one hidden node -> v_val empty -> error
    CHECK_THROWS_AS(split_nodes(10, 0.9, 0), std::invalid_argument);
    CHECK_THROWS_AS(split_nodes(100, 0.0, 0), std::invalid_argument);
}

TEST_CASE("partition masks sum to one over all nodes") {
    const int n = 40;
    const auto p = split_nodes(n, 0.6, 7);
    const auto m_in = build_mask(p.v_in, n);
    const auto m_opt = build_mask(p.v_opt, n);
    const auto m_val = build_mask(p.v_val, n);
    const auto m_test = build_mask(p.v_test, n);
    for (int i = 0; i < n; ++i)
        CHECK(m_in[i] + m_opt[i] + m_val[i] + m_test[i] == 1.0);

    // observed set sizes differ by at most one
    CHECK(std::abs(int(p.v_in.size()) - int(p.v_opt.size())) <= 1);
    CHECK(std::abs(int(p.v_val.size()) - int(p.v_test.size())) <= 1);
}

TEST_CASE("split_nodes is uniform across seeds") {
    const int n = 50;
    const double share = 0.5;
    std::vector<int> observed_count(n, 0);
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        const auto p = split_nodes(n, share, seed);
        for (int i : p.observed()) ++observed_count[i];
    }
    for (int i = 0; i < n; ++i) {
        const double freq = observed_count[i] / 1000.0;
        CHECK(freq > share - 0.05);
        CHECK(freq < share + 0.05);
    }
}

TEST_CASE("threshold_graph small cases") {
    const auto near = threshold_graph({{0, 0}, {1, 0}}, 2.0);
    CHECK(near.edges.size() == 2);
    CHECK_FALSE(near.all_isolated);

    const auto far = threshold_graph({{0, 0}, {3, 0}}, 2.0);
    CHECK(far.edges.empty());
    CHECK(far.all_isolated);

    CHECK_THROWS_AS(threshold_graph({{0, 0}, {1, 1}}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(threshold_graph({{0, 0}}, 1.0), std::invalid_argument);
}

TEST_CASE("threshold_graph matches brute-force distance scan") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 4);
    std::vector<std::pair<double, double>> coords(10);
    for (auto& c : coords) c = {u(rng), u(rng)};
    const double delta = 1.7;

    const auto res = threshold_graph(coords, delta);
    std::set<std::pair<int, int>> got(res.edges.begin(), res.edges.end());

    std::set<std::pair<int, int>> expect;
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) {
            if (i == j) continue;
            const double dx = coords[i].first - coords[j].first;
            const double dy = coords[i].second - coords[j].second;
            const double dist = std::sqrt(dx * dx + dy * dy);
            if (dist > 0 && dist <= delta) expect.insert({i, j});
        }
    CHECK(got == expect);
}

TEST_CASE("SensorGraph in-neighbor construction") {
    const auto g = SensorGraph::from_edges(3, {{0, 1}, {2, 1}, {1, 0}});
    CHECK(g.in_neighbors[1] == std::vector<int>{0, 2});
    CHECK(g.in_neighbors[0] == std::vector<int>{1});
    CHECK(g.in_neighbors[2].empty());
    CHECK(g.labels.cols == 1);  // defaults to the ones column

    CHECK_THROWS_AS(SensorGraph::from_edges(2, {{0, 2}}), std::out_of_range);
}

TEST_CASE("TimeSplit validation") {
    TimeSplit ok{10, 15, 20};
    CHECK_NOTHROW(ok.validate());
    TimeSplit bad{15, 10, 20};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
