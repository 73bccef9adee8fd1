#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "petsplat/errors.hpp"
#include "petsplat/fixtures.hpp"
#include "petsplat/model.hpp"
#include "support.hpp"

using namespace petsplat;
using testing::Rng;

namespace {

// Three vertices, one joint whose location is the mean of the first two.
ArticulatedModel single_joint_model() {
    ArticulatedModel m;
    m.template_vertices = {{1.0, 0.0, 0.0}, {0.0, 2.0, 0.0}, {0.5, 0.5, 1.0}};
    m.faces = {{0, 1, 2}};
    m.parents = {-1};
    m.joint_regressor = Eigen::MatrixXd(1, 3);
    m.joint_regressor << 0.5, 0.5, 0.0;
    m.skin_weights = Eigen::MatrixXd::Ones(3, 1);
    m.shape_basis = Eigen::MatrixXd::Zero(9, 1);
    m.validate();
    return m;
}

// Parameters packed as [beta, theta, trans, offsets].
Eigen::VectorXd pack(const AvatarParams& p) {
    std::vector<double> v(p.beta.data(), p.beta.data() + p.beta.size());
    v.insert(v.end(), p.theta.data(), p.theta.data() + p.theta.size());
    v.insert(v.end(), p.trans.data(), p.trans.data() + 3);
    for (const Vec3& d : p.offsets) v.insert(v.end(), d.data(), d.data() + 3);
    return testing::stack(v);
}

AvatarParams unpack(const Eigen::VectorXd& v, AvatarParams p) {
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < p.beta.size(); ++i) p.beta[i] = v[k++];
    for (Eigen::Index i = 0; i < p.theta.size(); ++i) p.theta[i] = v[k++];
    for (int i = 0; i < 3; ++i) p.trans[i] = v[k++];
    for (Vec3& d : p.offsets) {
        for (int i = 0; i < 3; ++i) d[i] = v[k++];
    }
    return p;
}

}  // namespace

TEST_CASE("canonical parameters reproduce the template") {
    const ArticulatedModel toy = make_toy_quadruped();
    const Mesh m = forward(toy, AvatarParams::canonical(toy));
    REQUIRE(m.vertices.size() == toy.template_vertices.size());
    CHECK(m.faces == toy.faces);
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
        CHECK((m.vertices[i] - toy.template_vertices[i]).norm() <= 1e-9);
    }
}

TEST_CASE("zero pose with a translation shifts every vertex") {
    const ArticulatedModel toy = make_toy_quadruped();
    AvatarParams p = AvatarParams::canonical(toy);
    p.trans = Vec3(1.0, 2.0, 3.0);
    const Mesh m = forward(toy, p);
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
        CHECK((m.vertices[i] - toy.template_vertices[i] - Vec3(1.0, 2.0, 3.0)).norm() <= 1e-9);
    }
}

TEST_CASE("root rotation of 90 degrees about z matches a hand-built rotation") {
    const ArticulatedModel m = single_joint_model();
    AvatarParams p = AvatarParams::canonical(m);
    p.theta = Eigen::Vector3d(0.0, 0.0, std::numbers::pi / 2.0);
    Mat3 rz;
    rz << 0.0, -1.0, 0.0,
          1.0, 0.0, 0.0,
          0.0, 0.0, 1.0;
    const Vec3 joint(0.5, 1.0, 0.0);
    const Mesh out = forward(m, p);
    for (std::size_t i = 0; i < 3; ++i) {
        const Vec3 expect = rz * (m.template_vertices[i] - joint) + joint;
        CHECK((out.vertices[i] - expect).norm() <= 1e-12);
    }
}

TEST_CASE("dimension mismatches are rejected") {
    const ArticulatedModel m = single_joint_model();
    AvatarParams p = AvatarParams::canonical(m);
    p.theta = Eigen::VectorXd::Zero(6);
    CHECK_THROWS_AS(forward(m, p), ParameterShapeError);
    p = AvatarParams::canonical(m);
    p.offsets.pop_back();
    CHECK_THROWS_AS(forward(m, p), ParameterShapeError);
    p = AvatarParams::canonical(m);
    p.beta = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(joint_positions(m, p), ParameterShapeError);
}

TEST_CASE("joint positions at zero shape are the regressed template") {
    const ArticulatedModel toy = make_toy_quadruped();
    const auto joints = joint_positions(toy, AvatarParams::canonical(toy));
    for (std::size_t j = 0; j < toy.num_joints(); ++j) {
        Vec3 expect = Vec3::Zero();
        for (std::size_t i = 0; i < toy.num_vertices(); ++i) {
            expect += toy.joint_regressor(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) *
                      toy.template_vertices[i];
        }
        CHECK((joints[j] - expect).norm() <= 1e-12);
    }
}

TEST_CASE("joint positions are linear in a one-hot blendshape") {
    ArticulatedModel m = single_joint_model();
    m.joint_regressor << 1.0, 0.0, 0.0;
    m.shape_basis(0, 0) = 1.0;  // vertex 0, x
    AvatarParams p = AvatarParams::canonical(m);
    for (double beta : {-2.0, 0.25, 3.0}) {
        p.beta[0] = beta;
        const auto j = joint_positions(m, p);
        CHECK(j[0].x() == doctest::Approx(1.0 + beta).epsilon(1e-15));
        CHECK(j[0].y() == 0.0);
    }
}

TEST_CASE("joint positions equal a dense matrix product on random models") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const ArticulatedModel m = testing::random_model(rng, 3, 5, 3);
        const AvatarParams p = testing::random_params(m, rng);
        const auto nv = static_cast<Eigen::Index>(m.num_vertices());
        // Dense oracle: J = R (T + B beta + d) written out over flat arrays.
        Eigen::VectorXd rest = testing::stack(m.template_vertices) + m.shape_basis * p.beta + testing::stack(p.offsets);
        Eigen::MatrixXd rest_mat(nv, 3);
        for (Eigen::Index i = 0; i < nv; ++i) rest_mat.row(i) = rest.segment<3>(3 * i).transpose();
        const Eigen::MatrixXd expect = m.joint_regressor * rest_mat;
        const auto joints = joint_positions(m, p);
        for (std::size_t j = 0; j < joints.size(); ++j) {
            CHECK((joints[j].transpose() - expect.row(static_cast<Eigen::Index>(j))).norm() <= 1e-12);
        }
    }
}

TEST_CASE("edge lengths of the unit right triangle") {
    Mesh m{{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}}};
    const auto len = edge_lengths(m);
    REQUIRE(len.size() == 3);
    // Edges sorted: (0,1), (0,2), (1,2).
    CHECK(len[0] == 1.0);
    CHECK(len[1] == 1.0);
    CHECK(len[2] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    for (Vec3& v : m.vertices) v *= 3.5;
    const auto scaled = edge_lengths(m);
    for (std::size_t i = 0; i < 3; ++i) CHECK(scaled[i] == doctest::Approx(3.5 * len[i]).epsilon(1e-15));
}

TEST_CASE("icosahedron edges match a brute-force scan") {
    const Mesh ico = make_icosahedron();
    const auto len = edge_lengths(ico);
    REQUIRE(len.size() == 30);
    // Oracle: vertex pairs that co-occur in some face.
    std::set<std::pair<std::uint32_t, std::uint32_t>> pairs;
    for (std::uint32_t a = 0; a < 12; ++a) {
        for (std::uint32_t b = a + 1; b < 12; ++b) {
            for (const Face& f : ico.faces) {
                const bool has_a = std::find(f.begin(), f.end(), a) != f.end();
                const bool has_b = std::find(f.begin(), f.end(), b) != f.end();
                if (has_a && has_b) pairs.insert({a, b});
            }
        }
    }
    REQUIRE(pairs.size() == 30);
    std::size_t k = 0;
    for (const auto& [a, b] : pairs) {
        CHECK(len[k] == doctest::Approx((ico.vertices[a] - ico.vertices[b]).norm()).epsilon(1e-15));
        CHECK(len[k] == doctest::Approx(len[0]).epsilon(1e-12));
        ++k;
    }
}

TEST_CASE("edge lengths survive rigid motions of the posed mesh") {
    Rng rng(5);
    const ArticulatedModel toy = make_toy_quadruped();
    for (int trial = 0; trial < 10; ++trial) {
        Mesh m = forward(toy, testing::random_params(toy, rng, 0.3, 0.01));
        const auto before = edge_lengths(m);
        const Mat3 r = rng.rotation();
        const Vec3 t = rng.vec(-5, 5);
        for (Vec3& v : m.vertices) v = r * v + t;
        const auto after = edge_lengths(m);
        for (std::size_t i = 0; i < before.size(); ++i) CHECK(std::abs(before[i] - after[i]) <= 1e-9);
    }
}

TEST_CASE("a common rigid transform on every joint moves the shaped template rigidly") {
    Rng rng(17);
    const ArticulatedModel toy = make_toy_quadruped();
    for (int trial = 0; trial < 5; ++trial) {
        AvatarParams p = testing::random_params(toy, rng, 0.0, 0.02);
        p.theta.setZero();
        const Vec3 aa = rng.vec(-2, 2);
        p.theta.segment<3>(0) = aa;
        const auto rest = shaped_rest_vertices(toy, p);
        const Vec3 root = joint_positions(toy, p)[0];
        const Mat3 r = Eigen::AngleAxisd(aa.norm(), aa.normalized()).toRotationMatrix();
        const Mesh out = forward(toy, p);
        for (std::size_t i = 0; i < rest.size(); ++i) {
            const Vec3 expect = r * (rest[i] - root) + root + p.trans;
            CHECK((out.vertices[i] - expect).norm() <= 1e-9);
        }
    }
}

TEST_CASE("rodrigues agrees with Eigen's angle-axis and its derivatives with finite differences") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec3 v = trial < 5 ? rng.vec(-1e-7, 1e-7) : rng.vec(-3, 3);
        const Mat3 expect = v.norm() > 0 ? Eigen::AngleAxisd(v.norm(), v.normalized()).toRotationMatrix()
                                         : Mat3::Identity();
        CHECK((rodrigues(v) - expect).norm() <= 1e-12);
        const auto d = rodrigues_derivatives(v);
        for (int i = 0; i < 3; ++i) {
            Vec3 vp = v, vm = v;
            vp[i] += 1e-6;
            vm[i] -= 1e-6;
            const Mat3 fd = (rodrigues(vp) - rodrigues(vm)) / 2e-6;
            CHECK((d[static_cast<std::size_t>(i)] - fd).norm() <= 1e-7);
        }
    }
    CHECK(rodrigues(Vec3::Zero()) == Mat3::Identity());
}

TEST_CASE("backpropagation matches finite differences of a linear functional") {
    Rng rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        const ArticulatedModel m = testing::random_model(rng, 2, 1 + trial % 5, 2);
        const AvatarParams p = testing::random_params(m, rng, 1.0, 0.1);
        std::vector<Vec3> g(m.num_vertices());
        for (Vec3& x : g) x = rng.vec();
        auto functional = [&](const AvatarParams& q) {
            const Mesh out = forward(m, q);
            double s = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) s += g[i].dot(out.vertices[i]);
            return s;
        };
        const ForwardTrace tr = forward_traced(m, p);
        const Eigen::VectorXd analytic = pack(backpropagate(m, p, tr, g));
        const Eigen::VectorXd base = pack(p);
        Eigen::VectorXd numeric(base.size());
        for (Eigen::Index i = 0; i < base.size(); ++i) {
            Eigen::VectorXd x = base;
            x[i] += 1e-6;
            const double fp = functional(unpack(x, p));
            x[i] -= 2e-6;
            const double fm = functional(unpack(x, p));
            numeric[i] = (fp - fm) / 2e-6;
        }
        CHECK(testing::rel_err(analytic, numeric) < 1e-6);
    }
}

TEST_CASE("kinematic order puts parents first and rejects malformed trees") {
    const std::vector<int> parents{2, -1, 1, 0};
    const auto order = kinematic_order(parents);
    REQUIRE(order.size() == 4);
    std::vector<int> pos(4);
    for (int i = 0; i < 4; ++i) pos[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i;
    for (int j = 0; j < 4; ++j) {
        if (parents[static_cast<std::size_t>(j)] >= 0) {
            CHECK(pos[static_cast<std::size_t>(parents[static_cast<std::size_t>(j)])] < pos[static_cast<std::size_t>(j)]);
        }
    }
    CHECK_THROWS_AS(kinematic_order(std::vector<int>{-1, -1}), ModelError);
    CHECK_THROWS_AS(kinematic_order(std::vector<int>{1, 0}), ModelError);
    CHECK_THROWS_AS(kinematic_order(std::vector<int>{-1, 2, 1}), ModelError);
    CHECK_THROWS_AS(kinematic_order(std::vector<int>{-1, 7}), ModelError);
}

TEST_CASE("model validation rejects broken invariants") {
    ArticulatedModel m = single_joint_model();
    m.skin_weights(1, 0) = 0.9;
    CHECK_THROWS_AS(m.validate(), ModelError);
    m = single_joint_model();
    m.faces = {{0, 1, 3}};
    CHECK_THROWS_AS(m.validate(), ModelError);
    m = single_joint_model();
    m.faces = {{0, 1, 1}};
    CHECK_THROWS_AS(m.validate(), ModelError);
    m = single_joint_model();
    m.template_vertices[0].x() = std::nan("");
    CHECK_THROWS_AS(m.validate(), ModelError);
    m = single_joint_model();
    m.joint_regressor = Eigen::MatrixXd::Zero(2, 3);
    CHECK_THROWS_AS(m.validate(), ModelError);
}
