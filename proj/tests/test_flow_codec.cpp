#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cflow/flow_codec.hpp"

using namespace cflow;

TEST_CASE("admissibility validation") {
    // single directed edge leaves odd rows
    Eigen::MatrixXi A = Eigen::MatrixXi::Zero(3, 3);
    A(0, 1) = 1;
    A(1, 0) = -1;
    CHECK_THROWS_AS(validate_admissible(A, {0}), DataError);

    // zero flow is admissible with zero flux
    AdmissibleFlow z = validate_admissible(Eigen::MatrixXi::Zero(3, 3), {0});
    CHECK(z.f(0) == 0);

    // even dimension and bad key sets rejected
    CHECK_THROWS_AS(validate_admissible(Eigen::MatrixXi::Zero(4, 4), {0, 1}), DataError);
    CHECK_THROWS_AS(validate_admissible(Eigen::MatrixXi::Zero(5, 5), {0}), DataError);
    CHECK_THROWS_AS(validate_admissible(Eigen::MatrixXi::Zero(5, 5), {0, 0}), DataError);

    // two-path flow through a 5x5 instance
    Eigen::MatrixXi B = Eigen::MatrixXi::Zero(5, 5);
    auto arc = [&](int i, int j) {
        B(i, j) = 1;
        B(j, i) = -1;
    };
    arc(0, 2);
    arc(2, 1);
    arc(0, 3);
    arc(3, 1);
    AdmissibleFlow fb = validate_admissible(B, {0, 1});
    CHECK(fb.f(0) == 2);
    CHECK(fb.f(1) == -2);
}

TEST_CASE("sampler output is always admissible and deterministic") {
    for (int n = 1; n <= 4; ++n) {
        AdmissibleFlow a = sample_admissible(n, 7);
        AdmissibleFlow b = sample_admissible(n, 7);
        CHECK((a.A - b.A).cwiseAbs().sum() == 0);
        CHECK(a.keys == b.keys);
    }
    for (int s = 0; s < 200; ++s) {
        AdmissibleFlow flow = sample_admissible(4, static_cast<std::uint64_t>(s));
        CHECK_NOTHROW(validate_admissible(flow.A, flow.keys));
    }
}

TEST_CASE("encode basics") {
    AdmissibleFlow z = validate_admissible(Eigen::MatrixXi::Zero(3, 3), {1});
    Ciphertext c = encode(z);
    CHECK(c.magnitude.cwiseAbs().sum() == 0);
    CHECK(c.f(0) == 0);

    AdmissibleFlow flow = sample_admissible(3, 11);
    Ciphertext cf = encode(flow);
    CHECK((cf.magnitude - cf.magnitude.transpose().eval()).cwiseAbs().sum() == 0);
    for (int i = 0; i < cf.magnitude.rows(); ++i)
        CHECK(cf.magnitude.row(i).sum() % 2 == 0);

    // negation keeps |A| and negates f
    AdmissibleFlow neg = flow;
    neg.A = -flow.A;
    neg.f = -flow.f;
    Ciphertext cn = encode(neg);
    CHECK((cn.magnitude - cf.magnitude).cwiseAbs().sum() == 0);
    CHECK((cn.f + cf.f).cwiseAbs().sum() == 0);
}

TEST_CASE("pure circulations are rejected at encode time") {
    // 4-cycle on non-key vertices of a 5x5 flow: valid matrix, zero flux
    Eigen::MatrixXi A = Eigen::MatrixXi::Zero(5, 5);
    auto arc = [&](int i, int j) {
        A(i, j) = 1;
        A(j, i) = -1;
    };
    arc(1, 2);
    arc(2, 3);
    arc(3, 4);
    arc(4, 1);
    AdmissibleFlow flow = validate_admissible(A, {0, 1});
    CHECK(flow.f(0) == 0);
    CHECK(flow.f(1) == 0);
    CHECK_THROWS_AS(encode(flow), DataError);
}

TEST_CASE("round trips on sampled flows") {
    int idx = 0;
    for (int n = 1; n <= 5; ++n) {
        for (int rep = 0; rep < 8; ++rep, ++idx) {
            AdmissibleFlow flow = sample_admissible(n, 1000 + idx);
            Ciphertext c = encode(flow);
            AdmissibleFlow back = decode(c, flow.keys);
            CHECK((back.A - flow.A).cwiseAbs().sum() == 0);
            CHECK((back.f - flow.f).cwiseAbs().sum() == 0);
        }
    }
}

TEST_CASE("decode of the empty ciphertext") {
    Ciphertext c;
    c.magnitude = Eigen::MatrixXi::Zero(3, 3);
    c.f = Eigen::VectorXi::Zero(1);
    AdmissibleFlow flow = decode(c, {0});
    CHECK(flow.A.cwiseAbs().sum() == 0);
}

TEST_CASE("decode rejects malformed input") {
    Ciphertext c;
    c.magnitude = Eigen::MatrixXi::Zero(3, 3);
    c.f = Eigen::VectorXi::Zero(1);
    CHECK_THROWS_AS(decode(c, {0, 1}), DataError);  // wrong key count

    c.magnitude(0, 1) = 1;  // not symmetric
    CHECK_THROWS_AS(decode(c, {0}), DataError);

    // magnitude support with no key flux is ambiguous
    Ciphertext amb;
    amb.magnitude = Eigen::MatrixXi::Zero(3, 3);
    amb.magnitude(1, 2) = amb.magnitude(2, 1) = 1;
    amb.f = Eigen::VectorXi::Zero(1);
    CHECK_THROWS_AS(decode(amb, {0}), DataError);
}

TEST_CASE("keyspace sizes") {
    KeyspaceSize k1 = keyspace_size(1);
    CHECK(k1.exact == 3);
    KeyspaceSize k2 = keyspace_size(2);
    CHECK(k2.exact == 20);

    // n = 10 against a direct big-integer product
    using boost::multiprecision::cpp_int;
    cpp_int fact = 1;
    for (int k = 2; k <= 10; ++k) fact *= k;
    cpp_int num = 1, den = 1;
    for (int k = 0; k < 10; ++k) {
        num *= 21 - k;
        den *= k + 1;
    }
    KeyspaceSize k10 = keyspace_size(10);
    CHECK(k10.exact == fact * (num / den));

    const double expect = std::pow(2.0, 21.0) / std::sqrt(10.0 * M_PI) * 3628800.0;
    CHECK(k10.estimate == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(k10.relative_deviation) < 0.10);

    CHECK_THROWS_AS(keyspace_size(0), DataError);
}
