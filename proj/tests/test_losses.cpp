#include <doctest.h>

#include "dentofuse/geometry.hpp"
#include "dentofuse/losses.hpp"

using namespace dfuse;

TEST_CASE("the full self-check battery passes") {
    auto checks = run_loss_checks(2024);
    REQUIRE(!checks.empty());
    for (const auto& c : checks) {
        INFO(c.name, " detail=", c.detail);
        CHECK(c.passed);
    }
}

TEST_CASE("batch construction partitions pixels into tp/fn/fp") {
    MatX emb(4, 2);
    emb << 1, 0, 0, 1, 1, 1, -1, 0;
    MatX probs(4, 2);
    probs << 0.9, 0.1, 0.2, 0.8, 0.7, 0.3, 0.4, 0.6;
    std::vector<int> gt{0, 1, 1, 0};
    auto b = EmbeddingBatch::create(emb, probs, gt);  // argmax: 0,1,0,1
    CHECK(b.tp[0] == std::vector<int>{0});
    CHECK(b.tp[1] == std::vector<int>{1});
    CHECK(b.fn[1] == std::vector<int>{2});  // gt 1 predicted 0
    CHECK(b.fp[0] == std::vector<int>{2});
    CHECK(b.fn[0] == std::vector<int>{3});
    CHECK(b.fp[1] == std::vector<int>{3});
    // tp and fn partition the ground-truth pixels of each class
    CHECK(b.tp[0].size() + b.fn[0].size() == 2);
    CHECK(b.tp[1].size() + b.fn[1].size() == 2);
}

TEST_CASE("probability rows must be stochastic") {
    MatX emb(1, 2);
    emb << 1, 0;
    MatX probs(1, 2);
    probs << 0.9, 0.3;
    CHECK_THROWS_AS(EmbeddingBatch::create(emb, probs, {0}), std::invalid_argument);
}

TEST_CASE("penalty terms stay inside [0, 2]") {
    Rng rng(15);
    for (int trial = 0; trial < 30; ++trial) {
        int n = 8, d = 3, k = 2;
        MatX emb(n, d), probs(n, k);
        std::vector<int> gt(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) emb(i, j) = rng.normal();
            double a = 0.1 + rng.uniform();
            probs(i, 0) = a / (a + 1.0);
            probs(i, 1) = 1.0 / (a + 1.0);
            gt[std::size_t(i)] = int(rng.uniform_index(2));
        }
        auto batch = EmbeddingBatch::create(emb, probs, gt);
        for (int i = 0; i < n; ++i) {
            auto pen = tec_penalties(batch, i);
            CHECK(pen.t_fp >= 0.0);
            CHECK(pen.t_fp <= 2.0);
            CHECK(pen.t_fn >= 0.0);
            CHECK(pen.t_fn <= 2.0);
        }
    }
}

TEST_CASE("tec loss requires a valid temperature and 2+ classes") {
    MatX emb(1, 2);
    emb << 1, 0;
    MatX probs(1, 2);
    probs << 0.6, 0.4;
    auto batch = EmbeddingBatch::create(emb, probs, {0});
    PrototypeBank bank;
    bank.prototypes = MatX::Identity(2, 2);
    LossConfig cfg;
    cfg.tau = 0.0;
    CHECK_THROWS_AS(tec_loss(batch, bank, cfg), std::invalid_argument);
    PrototypeBank single;
    single.prototypes = MatX::Ones(1, 2);
    LossConfig ok;
    CHECK_THROWS_AS(tec_loss(batch, single, ok), std::invalid_argument);
}

TEST_CASE("awohem with full keep and unit weights is mean cross entropy") {
    Rng rng(8);
    MatX probs(40, 3);
    std::vector<int> gt(40);
    for (int i = 0; i < 40; ++i) {
        double sum = 0;
        for (int c = 0; c < 3; ++c) {
            probs(i, c) = 0.05 + rng.uniform();
            sum += probs(i, c);
        }
        probs.row(i) /= sum;
        gt[std::size_t(i)] = int(rng.uniform_index(3));
    }
    LossConfig cfg;
    cfg.kept_fraction = 1.0;
    cfg.class_weights = {1.0, 1.0, 1.0};
    double mean = 0;
    for (int i = 0; i < 40; ++i) mean += -std::log(probs(i, gt[std::size_t(i)]));
    mean /= 40.0;
    CHECK(std::abs(awohem_ce(probs, gt, cfg) - mean) < 1e-12);
}

TEST_CASE("centroid loss translation invariance") {
    Rng rng(31);
    int n = 20, k = 3;
    MatX probs(n, k);
    std::vector<int> gt(static_cast<std::size_t>(n));
    std::vector<Eigen::Vector3d> pos(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double sum = 0;
        for (int c = 0; c < k; ++c) {
            probs(i, c) = 0.05 + rng.uniform();
            sum += probs(i, c);
        }
        probs.row(i) /= sum;
        gt[std::size_t(i)] = int(rng.uniform_index(3));
        pos[std::size_t(i)] =
            Eigen::Vector3d(rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4));
    }
    LossConfig cfg;
    double before = centroid_loss(probs, pos, gt, cfg).value;
    Eigen::Vector3d t(3.5, -2.0, 9.0);
    for (auto& p : pos) p += t;
    double after = centroid_loss(probs, pos, gt, cfg).value;
    CHECK(std::abs(before - after) < 1e-9);
}

TEST_CASE("centroid fallback uses the global centroid for empty classes") {
    // class 1 never crosses th_l, so its thresholded mass is zero
    MatX probs(2, 3);
    probs << 0.6, 0.1, 0.3, 0.6, 0.1, 0.3;
    std::vector<int> gt{1, 1};
    std::vector<Eigen::Vector3d> pos{{0, 0, 0}, {2, 0, 0}};
    LossConfig cfg;
    double v = centroid_loss(probs, pos, gt, cfg).value;
    // global centroid (1,0,0) equals gc of class 1 -> zero distance; class 2
    // is absent from gt so only class 1 counts
    CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("boundary loss knn variant selects by max KL divergence") {
    // 40 points on a line; the 2 with distinct distributions win selection
    int n = 40;
    MatX probs(n, 2);
    std::vector<int> gt(std::size_t(n), 0);
    std::vector<Eigen::Vector3d> pos(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        pos[std::size_t(i)] = Eigen::Vector3d(double(i), 0, 0);
        probs(i, 0) = 0.9;
        probs(i, 1) = 0.1;
    }
    probs(20, 0) = 0.1;
    probs(20, 1) = 0.9;  // outlier surrounded by 0.9/0.1 neighbors
    gt[20] = 1;
    LossConfig cfg;  // K = 5, top 5% of 40 -> 2 points
    double v = boundary_loss(probs, pos, gt, cfg);
    // point 20 (p_gt = 0.9) and one of its neighbors (p_gt = 0.9) are chosen
    CHECK(v == doctest::Approx(-std::log(0.9)).epsilon(1e-9));
}

TEST_CASE("kl divergence basics") {
    VecX p(2), q(2);
    p << 1.0, 0.0;
    q << 0.5, 0.5;
    CHECK(kl_divergence(p, q) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    CHECK(kl_divergence(p, p) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(kl_divergence(q, p) > 0.0);  // smoothed, stays finite
}

TEST_CASE("seg loss combines awohem and weighted tec") {
    Rng rng(77);
    MatX emb(6, 3), probs(6, 2);
    std::vector<int> gt(6);
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 3; ++j) emb(i, j) = rng.normal();
        double a = 0.2 + rng.uniform();
        probs(i, 0) = a / (a + 1);
        probs(i, 1) = 1 / (a + 1);
        gt[std::size_t(i)] = int(rng.uniform_index(2));
    }
    auto batch = EmbeddingBatch::create(emb, probs, gt);
    PrototypeBank bank;
    bank.prototypes = MatX(2, 3);
    bank.prototypes << 1, 0, 0, 0, 1, 0;
    LossConfig cfg;
    double total = seg_loss(batch, bank, cfg);
    double awohem = awohem_ce(probs, gt, cfg);
    double tec = tec_loss(batch, bank, cfg).value;
    CHECK(total == doctest::Approx(awohem + 0.1 * tec).epsilon(1e-12));
}
