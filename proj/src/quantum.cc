// Copyright 2026 The eprb Authors
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

#include "eprb/quantum.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "eprb/error.h"

namespace eprb {

namespace {

using cd = std::complex<double>;

Matrix2c make2(cd a, cd b, cd c, cd d) {
    Matrix2c m;
    m << a, b, c, d;
    return m;
}

// Tr(E rho) for Hermitian E and rho.
double trace_product(const Matrix4c &effect, const Matrix4c &rho) {
    return (effect.array() * rho.conjugate().array()).sum().real();
}

}  // namespace

const Matrix2c &pauli_identity() {
    static const Matrix2c m = Matrix2c::Identity();
    return m;
}

const Matrix2c &pauli_x() {
    static const Matrix2c m = make2(0, 1, 1, 0);
    return m;
}

const Matrix2c &pauli_y() {
    static const Matrix2c m = make2(0, cd(0, -1), cd(0, 1), 0);
    return m;
}

const Matrix2c &pauli_z() {
    static const Matrix2c m = make2(1, 0, 0, -1);
    return m;
}

MeasurementDirection::MeasurementDirection(const Eigen::Vector3d &v) : v_(v) {
    if (!v.allFinite() || std::abs(v.norm() - 1.0) > 1e-12) {
        std::ostringstream out;
        out << "measurement direction must be a unit vector, got norm " << v.norm();
        fail(ErrorKind::InvalidInput, out.str());
    }
}

ProjectorPair measurement_operators(const MeasurementDirection &direction) {
    const Eigen::Vector3d &n = direction.vector();
    Matrix2c n_sigma = n.x() * pauli_x() + n.y() * pauli_y() + n.z() * pauli_z();
    return {0.5 * (pauli_identity() + n_sigma), 0.5 * (pauli_identity() - n_sigma)};
}

Eigen::Vector3d alice_axis(double theta, int setting) {
    double angle = setting == 0 ? theta : theta - std::numbers::pi / 2;
    return {std::sin(angle), 0.0, std::cos(angle)};
}

Eigen::Vector3d bob_axis(int setting) {
    return setting == 0 ? Eigen::Vector3d(0, 0, 1) : Eigen::Vector3d(-1, 0, 0);
}

ExperimentGeometry geometry_for_experiment(double theta) {
    if (!std::isfinite(theta)) {
        fail(ErrorKind::InvalidInput, "theta must be finite");
    }
    ExperimentGeometry g;
    g.theta = theta;
    for (int s = 0; s < 2; ++s) {
        auto a = measurement_operators(MeasurementDirection(alice_axis(theta, s)));
        g.alice[s] = {a.result0, a.result1};
        auto b = measurement_operators(MeasurementDirection(bob_axis(s)));
        g.bob[s] = {b.result0, b.result1};
    }
    return g;
}

Matrix4c kron(const Matrix2c &a, const Matrix2c &b) {
    Matrix4c out;
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            out.block<2, 2>(2 * r, 2 * c) = a(r, c) * b;
        }
    }
    return out;
}

std::optional<std::string> DensityMatrix::check(const Matrix4c &m) {
    if (!m.allFinite()) {
        return "matrix has non-finite entries";
    }
    if (!is_hermitian(m)) {
        return "matrix is not Hermitian";
    }
    if (std::abs(m.trace().real() - 1.0) > kTraceTolerance) {
        std::ostringstream out;
        out << "trace is " << m.trace().real() << ", expected 1";
        return out.str();
    }
    Eigen::SelfAdjointEigenSolver<Matrix4c> solver(m, Eigen::EigenvaluesOnly);
    if (solver.eigenvalues().minCoeff() < kEigenvalueFloor) {
        std::ostringstream out;
        out << "matrix is not positive semidefinite (min eigenvalue " << solver.eigenvalues().minCoeff() << ")";
        return out.str();
    }
    return std::nullopt;
}

DensityMatrix DensityMatrix::from_matrix(const Matrix4c &m) {
    if (auto problem = check(m)) {
        fail(ErrorKind::InvalidInput, "invalid density matrix: " + *problem);
    }
    return DensityMatrix(m);
}

Eigen::Vector4d DensityMatrix::eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Matrix4c> solver(m_, Eigen::EigenvaluesOnly);
    return solver.eigenvalues();
}

Matrix4c density_factor(const DensityParams &p) {
    Matrix4c l = Matrix4c::Zero();
    for (int d = 0; d < 4; ++d) {
        l(d, d) = p[d];
    }
    int k = 4;
    for (int r = 1; r < 4; ++r) {
        for (int c = 0; c < r; ++c) {
            l(r, c) = cd(p[k], p[k + 1]);
            k += 2;
        }
    }
    return l;
}

DensityMatrix decode_factor(const Matrix4c &factor) {
    Matrix4c m = factor * factor.adjoint();
    double tr = m.trace().real();
    if (!(tr > 0.0) || !std::isfinite(tr)) {
        fail(ErrorKind::DegenerateInput, "density factor is zero or non-finite");
    }
    m /= tr;
    // Symmetrize away roundoff so the Hermitian check holds exactly.
    Matrix4c h = 0.5 * (m + m.adjoint());
    return DensityMatrix(h);
}

DensityMatrix decode_density(const DensityParams &params) {
    return decode_factor(density_factor(params));
}

DensityParams encode_density(const DensityMatrix &rho) {
    // Cholesky–Banachiewicz with zero pivots allowed: a PSD matrix with a
    // vanishing pivot has a vanishing column below it.
    const Matrix4c &a = rho.matrix();
    Matrix4c l = Matrix4c::Zero();
    const double pivot_floor = 1e-14;
    for (int j = 0; j < 4; ++j) {
        double d = a(j, j).real();
        for (int k = 0; k < j; ++k) {
            d -= std::norm(l(j, k));
        }
        if (d <= pivot_floor) {
            continue;
        }
        double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (int i = j + 1; i < 4; ++i) {
            cd s = a(i, j);
            for (int k = 0; k < j; ++k) {
                s -= l(i, k) * std::conj(l(j, k));
            }
            l(i, j) = s / ljj;
        }
    }
    DensityParams p{};
    for (int d = 0; d < 4; ++d) {
        p[d] = l(d, d).real();
    }
    int k = 4;
    for (int r = 1; r < 4; ++r) {
        for (int c = 0; c < r; ++c) {
            p[k] = l(r, c).real();
            p[k + 1] = l(r, c).imag();
            k += 2;
        }
    }
    return p;
}

DensityMatrix singlet_state() {
    Matrix4c m = Matrix4c::Zero();
    m(1, 1) = 0.5;
    m(2, 2) = 0.5;
    m(1, 2) = -0.5;
    m(2, 1) = -0.5;
    return DensityMatrix::from_matrix(m);
}

DensityMatrix maximally_mixed_state() {
    return DensityMatrix::from_matrix(Matrix4c::Identity() / 4.0);
}

DensityMatrix mix_states(const DensityMatrix &a, const DensityMatrix &b, double weight) {
    if (!(weight >= 0.0 && weight <= 1.0)) {
        fail(ErrorKind::InvalidInput, "mixing weight must lie in [0, 1]");
    }
    return DensityMatrix::from_matrix(weight * a.matrix() + (1.0 - weight) * b.matrix());
}

double trace_distance(const DensityMatrix &a, const DensityMatrix &b) {
    Matrix4c diff = a.matrix() - b.matrix();
    Eigen::SelfAdjointEigenSolver<Matrix4c> solver(0.5 * (diff + diff.adjoint()), Eigen::EigenvaluesOnly);
    return 0.5 * solver.eigenvalues().cwiseAbs().sum();
}

double pauli_component(const DensityMatrix &rho, int alice_pauli, int bob_pauli) {
    const Matrix2c *paulis[4] = {&pauli_identity(), &pauli_x(), &pauli_y(), &pauli_z()};
    if (alice_pauli < 0 || alice_pauli > 3 || bob_pauli < 0 || bob_pauli > 3) {
        fail(ErrorKind::InvalidInput, "Pauli index must be 0..3");
    }
    return trace_product(kron(*paulis[alice_pauli], *paulis[bob_pauli]), rho.matrix());
}

DensityMatrix fix_unobserved_components(const DensityMatrix &rho) {
    Matrix4c real_part = rho.matrix().real().cast<cd>();
    const Matrix4c yy = kron(pauli_y(), pauli_y());
    auto min_eig = [&](double s) {
        Eigen::SelfAdjointEigenSolver<Matrix4c> solver(real_part + s * yy, Eigen::EigenvaluesOnly);
        return solver.eigenvalues()(0);
    };
    const double slack = -1e-13;
    // The PSD set along yy is an interval containing 0; rho + s*yy needs
    // |s| <= 1/2 since yy has eigenvalues +-1 and rho has trace 1.
    auto edge = [&](double direction) {
        double inside = 0.0;
        double outside = direction * 0.5;
        if (min_eig(outside) >= slack) {
            return outside;
        }
        for (int it = 0; it < 200 && std::abs(outside - inside) > 1e-15; ++it) {
            double mid = 0.5 * (inside + outside);
            (min_eig(mid) >= slack ? inside : outside) = mid;
        }
        return inside;
    };
    double shift = 0.5 * (edge(-1.0) + edge(1.0));
    Matrix4c out = real_part + shift * yy;
    return DensityMatrix::from_matrix(0.5 * (out + out.adjoint()));
}

TraceRuleEvaluator::TraceRuleEvaluator(const ExperimentGeometry &g) {
    const Matrix2c &id = pauli_identity();
    for (int s = 0; s < 2; ++s) {
        for (int r = 0; r < 2; ++r) {
            alice_effects_[single_index(s, r)] = kron(g.alice[s][r], id);
            bob_effects_[single_index(s, r)] = kron(id, g.bob[s][r]);
        }
    }
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            for (int k = 0; k < 2; ++k) {
                for (int l = 0; l < 2; ++l) {
                    joint_effects_[coincidence_index(i, j, k, l)] = kron(g.alice[i][j], g.bob[k][l]);
                }
            }
        }
    }
}

QuantumProbs TraceRuleEvaluator::evaluate(const Matrix4c &rho) const {
    QuantumProbs q;
    for (int c = 0; c < 4; ++c) {
        q.qa[c] = trace_product(alice_effects_[c], rho);
        q.qb[c] = trace_product(bob_effects_[c], rho);
    }
    for (int c = 0; c < 16; ++c) {
        q.qc[c] = trace_product(joint_effects_[c], rho);
    }
    return q;
}

QuantumProbs quantum_probs(const DensityMatrix &rho, const ExperimentGeometry &geometry) {
    return TraceRuleEvaluator(geometry).evaluate(rho.matrix());
}

}  // namespace eprb
