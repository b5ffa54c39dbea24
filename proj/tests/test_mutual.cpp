#include <algorithm>
#include <cmath>
#include <random>

#include <doctest.h>

#include "qrd/grad_check.hpp"
#include "qrd/mutual.hpp"

using namespace qrd;

namespace {

Tensor rand_hidden(int t, int d, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> v(static_cast<size_t>(t) * d);
    for (double& x : v) x = nd(rng);
    return Tensor::from_values({t, d}, v);
}

}  // namespace

TEST_CASE("shared space init sizes one head per student") {
    SharedSpace s = SharedSpace::init({64, 48}, 32, 5);
    CHECK(s.n_students() == 2);
    CHECK(s.proj_w[0].rows() == 64);
    CHECK(s.proj_w[1].rows() == 48);
    CHECK(s.proj_w[0].cols() == 32);
    CHECK(s.proj_b[0].size() == 32);
    CHECK(s.comp_w[0].rows() == 32);
    CHECK(s.trainable().size() == 6);
}

TEST_CASE("projection maps token rows into the shared width") {
    std::mt19937_64 rng(3);
    SharedSpace s = SharedSpace::init({8, 6}, 4, 9);
    Tensor h = rand_hidden(5, 8, rng);
    Tensor z = project(h, s, 0);
    CHECK(z.rows() == 5);
    CHECK(z.cols() == 4);
    CHECK_THROWS(project(h, s, 1));   // width mismatch
    CHECK_THROWS(project(h, s, 2));   // no such student
}

TEST_CASE("competence matches a loop softmax oracle over 100 random cases") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        int d_sh = 3 + static_cast<int>(rng() % 4);
        int n = 2 + static_cast<int>(rng() % 3);
        std::vector<int> widths(n, 5);
        SharedSpace s = SharedSpace::init(widths, d_sh, seed + 1);
        std::vector<Tensor> projected;
        for (int i = 0; i < n; ++i)
            projected.push_back(project(rand_hidden(4, 5, rng), s, i));
        Tensor gamma = competence(projected, s);
        REQUIRE(gamma.size() == n);

        // oracle: softmax over students of w_s . mean_t z_s
        std::vector<double> scores(n, 0.0);
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < d_sh; ++c) {
                double col = 0.0;
                for (int t = 0; t < 4; ++t) col += projected[i].at(t, c);
                scores[i] += (col / 4.0) * s.comp_w[i].at(c, 0);
            }
        }
        double mx = *std::max_element(scores.begin(), scores.end());
        double zsum = 0.0;
        for (double& x : scores) zsum += std::exp(x - mx);
        double gsum = 0.0;
        for (int i = 0; i < n; ++i) {
            double expect = std::exp(scores[i] - mx) / zsum;
            CHECK(gamma.data()[i] == doctest::Approx(expect).epsilon(1e-9));
            gsum += gamma.data()[i];
        }
        CHECK(gsum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("ensemble is the competence-weighted sum, token-wise") {
    std::mt19937_64 rng(11);
    SharedSpace s = SharedSpace::init({6, 6}, 4, 2);
    std::vector<Tensor> projected{project(rand_hidden(3, 6, rng), s, 0),
                                  project(rand_hidden(3, 6, rng), s, 1)};
    Tensor gamma = competence(projected, s);
    Tensor ens = ensemble(projected, gamma);
    for (int t = 0; t < 3; ++t)
        for (int c = 0; c < 4; ++c) {
            double expect = gamma.data()[0] * projected[0].at(t, c) +
                            gamma.data()[1] * projected[1].at(t, c);
            CHECK(ens.at(t, c) == doctest::Approx(expect).epsilon(1e-9));
        }
}

TEST_CASE("mutual loss: mean over pairs by default, raw sum behind the flag") {
    MutualBatch b;
    b.per_pair_losses.push_back(Tensor::scalar(2.0));
    b.per_pair_losses.push_back(Tensor::scalar(4.0));
    b.per_pair_losses.push_back(Tensor::scalar(6.0));
    CHECK(mutual_loss(b).value() == doctest::Approx(4.0));
    CHECK(mutual_loss(b, true).value() == doctest::Approx(12.0));
    MutualBatch empty;
    CHECK(mutual_loss(empty).value() == 0.0);
}

TEST_CASE("full mutual objective gradients match finite differences") {
    std::mt19937_64 rng(17);
    SharedSpace s = SharedSpace::init({6, 5}, 4, 21);
    Tensor h0 = rand_hidden(3, 6, rng), h1 = rand_hidden(3, 5, rng);
    auto build = [&]() {
        std::vector<Tensor> projected{project(h0, s, 0), project(h1, s, 1)};
        Tensor gamma = competence(projected, s);
        Tensor ens = ensemble(projected, gamma);
        MutualBatch mb;
        for (const Tensor& z : projected) mb.per_pair_losses.push_back(mse(z, ens));
        return mutual_loss(mb);
    };
    auto rep = gradient_check(build, s.trainable());
    CHECK(rep.max_rel_error < 1e-5);
}

TEST_CASE("shared space save/load round trip") {
    SharedSpace s = SharedSpace::init({10, 7}, 6, 33);
    std::string path = "/tmp/qrd_test_shared.ckpt";
    save_shared(s, path);
    SharedSpace back = load_shared(path);
    CHECK(back.d_shared == 6);
    REQUIRE(back.n_students() == 2);
    for (int i = 0; i < 2; ++i) {
        CHECK((back.proj_w[i].data() == s.proj_w[i].data()).all());
        CHECK((back.proj_b[i].data() == s.proj_b[i].data()).all());
        CHECK((back.comp_w[i].data() == s.comp_w[i].data()).all());
    }
}
