// Copyright 2026 The qmfs-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qmfs/polynomial.h"

#include <cmath>

#include <gtest/gtest.h>

using namespace qmfs;
using nlohmann::json;

TEST(polynomial, evaluation_and_derivatives) {
    Polynomial p(1);
    p.add(2.0, 2, 1).add(-0.5, 0, 3).add(1.5, 1, 0, TimeFactor::cosine(2.0, 0.3));
    Eigen::VectorXd Q(1), Pi(1);
    Q << 0.7;
    Pi << -1.2;
    double t = 0.4;
    double expected = 2.0 * 0.49 * -1.2 - 0.5 * std::pow(-1.2, 3) + 1.5 * std::cos(0.8 + 0.3) * 0.7;
    EXPECT_NEAR(p(Q, Pi, t), expected, 1e-15);
    EXPECT_EQ(p.degree(), 3);
    EXPECT_TRUE(p.is_time_dependent());
    EXPECT_NEAR(p.d_dQ(0)(Q, Pi, t), 4.0 * 0.7 * -1.2 + 1.5 * std::cos(1.1), 1e-15);
    EXPECT_NEAR(p.d_dPi(0)(Q, Pi, t), 2.0 * 0.49 - 1.5 * 1.44, 1e-15);
    EXPECT_TRUE(Polynomial::term(1.0, 0, 0).d_dQ(0).empty());
}

TEST(polynomial, rejects_bad_terms) {
    Polynomial p(1);
    EXPECT_THROW(p.add(1.0, -1, 0), std::invalid_argument);
    EXPECT_THROW(p.add(std::nan(""), 1, 0), std::invalid_argument);
    EXPECT_THROW(p.add(Monomial{{1, 0}, {0, 0}, 1.0, {}}), std::invalid_argument);
    EXPECT_THROW(Polynomial(0), std::invalid_argument);
}

TEST(polynomial, koopman_validation) {
    PolyKoopman pk = PolyKoopman::harmonic(1.0, 1.0);
    EXPECT_NO_THROW(pk.validate());
    pk.f[0].add(1.0, 5, 0);
    EXPECT_THROW(pk.validate(), std::invalid_argument);
    EXPECT_NO_THROW(pk.validate(5));
    PolyKoopman three = PolyKoopman::harmonic(1.0, 1.0);
    three.M = 3;
    EXPECT_THROW(three.validate(), std::invalid_argument);
    PolyKoopman missing = PolyKoopman::harmonic(1.0, 1.0);
    missing.g.clear();
    EXPECT_THROW(missing.validate(), std::invalid_argument);
}

TEST(polynomial, harmonic_koopman_is_linear_pair) {
    double m = 1.7, omega = 0.6;
    auto model = as_linear_model(PolyKoopman::harmonic(m, omega));
    ASSERT_TRUE(model.has_value());
    // H = P Pi / m + m omega^2 Phi Q in (Q, P, Phi, Pi).
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(4, 4);
    expected(1, 3) = expected(3, 1) = 1.0 / m;
    expected(0, 2) = expected(2, 0) = m * omega * omega;
    EXPECT_LT((model->G() - expected).cwiseAbs().maxCoeff(), 1e-15);

    PolyKoopman with_h = PolyKoopman::harmonic(m, omega);
    with_h.h.add(0.25, 2, 0).add(0.5, 1, 1);
    auto model_h = as_linear_model(with_h);
    ASSERT_TRUE(model_h.has_value());
    EXPECT_DOUBLE_EQ(model_h->G()(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(model_h->G()(0, 3), 0.5);

    EXPECT_FALSE(as_linear_model(PolyKoopman::quadratic_drift(m, omega, 0.1)).has_value());
    PolyKoopman driven = PolyKoopman::harmonic(m, omega);
    driven.f[0] = Polynomial(1).add(1.0, 0, 1, TimeFactor::cosine(1.0));
    EXPECT_FALSE(as_linear_model(driven).has_value());
}

TEST(polynomial, json_round_trip) {
    PolyKoopman pk = PolyKoopman::quadratic_drift(1.5, 0.8, 0.1, 0.5);
    pk.h.add(0.3, 1, 1, TimeFactor::cosine(2.0, 0.1));
    json j = to_json(pk);
    PolyKoopman back = poly_koopman_from_json(j);
    EXPECT_EQ(to_json(back), j);
    EXPECT_EQ(back.hbar, 0.5);
    EXPECT_EQ(back.h.terms()[0].time, TimeFactor::cosine(2.0, 0.1));

    json two = json::parse(R"({"M": 2,
        "f": [[{"a": [0, 0], "b": [1, 0], "coef": 1.0}], [{"a": [0, 0], "b": [0, 1], "coef": 1.0}]],
        "g": [[{"a": [1, 0], "b": [0, 0], "coef": 1.0}], [{"a": [0, 1], "b": [0, 0], "coef": 2.0}]]})");
    PolyKoopman pk2 = poly_koopman_from_json(two);
    EXPECT_EQ(pk2.M, 2);
    EXPECT_EQ(to_json(poly_koopman_from_json(to_json(pk2))), to_json(pk2));
}

TEST(polynomial, json_rejects_malformed_input) {
    EXPECT_THROW(poly_koopman_from_json(json::parse(R"({"M": 1, "k": []})")), std::invalid_argument);
    EXPECT_THROW(poly_koopman_from_json(json::parse(R"({"M": 1, "f": [{"a": 1, "coef": 1}]})")),
                 std::invalid_argument);
    EXPECT_THROW(poly_koopman_from_json(json::parse(R"({"M": 1, "f": [{"a": 1, "b": 0, "c": 1}]})")),
                 std::invalid_argument);
    EXPECT_THROW(poly_koopman_from_json(json::parse(R"({"M": 2, "f": [{"a": 1, "b": 0, "coef": 1}]})")),
                 std::invalid_argument);
    EXPECT_THROW(poly_koopman_from_json(json::parse(R"({"M": 1, "f": [{"a": 5, "b": 0, "coef": 1}]})")),
                 std::invalid_argument);
}
