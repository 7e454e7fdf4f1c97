// fock.hpp: truncated Fock-space oracle for the master equations
//
// Dense Eigen matrices in the number basis |0>, ..., |N-1>. Conventions:
// X = (a + a^dag)/sqrt2, P = i (a^dag - a)/sqrt2, hbar = 1. Truncation
// corrupts only products that reach the top level (e.g. a a^dag), which is
// why operators built from several ladder factors are formed one level
// larger and then cropped.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <sstream>
#include <vector>

#include "lqbm/coefficients.hpp"
#include "lqbm/error.hpp"
#include "lqbm/linear_dynamics.hpp"

namespace lqbm {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;

struct FockOperators {
    int dim{};
    CMat a, adag, X, P;
    CMat X2, P2, XP_anti;  // X^2, P^2, {X,P}, each exact on the full N x N block
    CMat n, id;
};

namespace detail {

inline CMat lowering(int dim) {
    CMat a = CMat::Zero(dim, dim);
    for (int k = 1; k < dim; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
    return a;
}

} // namespace detail

inline FockOperators build_operators(int dim) {
    if (dim < 2) throw validation_error("build_operators: dim must be >= 2");
    FockOperators f;
    f.dim = dim;
    f.a = detail::lowering(dim);
    f.adag = f.a.adjoint();
    const double s = 1.0 / std::sqrt(2.0);
    f.X = s * (f.a + f.adag);
    f.P = cplx(0.0, s) * (f.adag - f.a);
    // quadratic forms from one level up, cropped
    const CMat a1 = detail::lowering(dim + 1);
    const CMat d1 = a1.adjoint();
    const CMat X1 = s * (a1 + d1);
    const CMat P1 = cplx(0.0, s) * (d1 - a1);
    f.X2 = (X1 * X1).topLeftCorner(dim, dim);
    f.P2 = (P1 * P1).topLeftCorner(dim, dim);
    f.XP_anti = (X1 * P1 + P1 * X1).topLeftCorner(dim, dim);
    f.n = f.adag * f.a;
    f.id = CMat::Identity(dim, dim);
    return f;
}

// ---- density matrices ------------------------------------------------------

struct DensityMatrix {
    CMat data;

    int dim() const { return static_cast<int>(data.rows()); }
    double trace_error() const { return std::abs(data.trace() - cplx(1.0, 0.0)); }
    double hermiticity_error() const { return (data - data.adjoint()).cwiseAbs().maxCoeff(); }
    double min_eigenvalue() const {
        const Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (data + data.adjoint()), Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }
    void validate(double herm_tol = 1e-12, double trace_tol = 1e-10) const {
        if (data.rows() != data.cols() || data.rows() == 0) throw validation_error("DensityMatrix: not square");
        if (hermiticity_error() > herm_tol) throw validation_error("DensityMatrix: not Hermitian");
        if (trace_error() > trace_tol) throw validation_error("DensityMatrix: trace differs from 1");
    }
};

inline DensityMatrix fock_state(int dim, int k) {
    if (k < 0 || k >= dim) throw validation_error("fock_state: level outside truncation");
    DensityMatrix r{CMat::Zero(dim, dim)};
    r.data(k, k) = 1.0;
    return r;
}

inline DensityMatrix thermal_state(int dim, double nbar) {
    if (nbar < 0.0) throw validation_error("thermal_state: nbar must be >= 0");
    DensityMatrix r{CMat::Zero(dim, dim)};
    const double q = nbar / (nbar + 1.0);
    double w = 1.0 / (nbar + 1.0), tot = 0.0;
    for (int k = 0; k < dim; ++k, w *= q) {
        r.data(k, k) = w;
        tot += w;
    }
    r.data /= tot;
    return r;
}

// Gaussian state with covariance given by s and the requested mean, built as
// displace * rotate * squeeze * thermal in a larger working space and cropped.
inline DensityMatrix gaussian_density(const GaussianState& s, const FirstMoments& mean, int dim, int work_dim = 0) {
    if (!s.physical(1e-12)) throw validation_error("gaussian_density: state violates dx2 dp2 (1 - rho^2) >= 1");
    if (work_dim <= 0) work_dim = 2 * dim + 20;
    if (work_dim < dim) throw validation_error("gaussian_density: work_dim must be >= dim");

    const SecondMoments m = to_moments(s);
    const double nu = std::sqrt(std::max(m.xx * m.pp - m.xp * m.xp, 0.25));
    const double a = m.xx, c = m.pp, b = m.xp;
    const double disc = std::hypot(a - c, 2.0 * b);
    const double l1 = 0.5 * (a + c + disc);
    const double l2 = (a * c - b * b) / l1;
    const double sq = 0.25 * std::log(l1 / l2);   // X -> e^sq X along the major axis
    const double theta = 0.5 * std::atan2(2.0 * b, a - c);

    const FockOperators w = build_operators(work_dim);
    CMat rho = thermal_state(work_dim, nu - 0.5).data;
    if (sq != 0.0) {
        const CMat D = 0.5 * (w.X * w.P + w.P * w.X);
        const CMat U = (cplx(0.0, -sq) * D).exp();
        rho = U * rho * U.adjoint();
    }
    if (theta != 0.0) {
        // exp(-i phi n) maps X -> X cos phi + P sin phi; phi = -theta puts the
        // major axis at angle theta
        CMat U = CMat::Zero(work_dim, work_dim);
        for (int k = 0; k < work_dim; ++k) U(k, k) = std::polar(1.0, theta * k);
        rho = U * rho * U.adjoint();
    }
    if (mean.x != 0.0 || mean.p != 0.0) {
        const cplx alpha = cplx(mean.x, mean.p) / std::sqrt(2.0);
        const CMat U = (alpha * w.adag - std::conj(alpha) * w.a).exp();
        rho = U * rho * U.adjoint();
    }
    DensityMatrix out{rho.topLeftCorner(dim, dim)};
    out.data = 0.5 * (out.data + out.data.adjoint());
    out.data /= out.data.trace().real();
    return out;
}

// ---- moments and certificates ----------------------------------------------

struct FockMoments {
    double x{}, p{};
    double xx{}, xp{}, pp{};  // <X^2>, <{X,P}>/2, <P^2>

    GaussianState central() const {
        return to_gaussian({xx - x * x, xp - x * p, pp - p * p});
    }
};

inline double expect(const CMat& rho, const CMat& op) { return (rho * op).trace().real(); }

inline FockMoments moments_from_density(const DensityMatrix& rho, const FockOperators& ops) {
    const CMat& r = rho.data;
    return {expect(r, ops.X), expect(r, ops.P), expect(r, ops.X2), 0.5 * expect(r, ops.XP_anti),
            expect(r, ops.P2)};
}

struct HupCertificate {
    double sigma_x{}, sigma_p{}, product{};
    bool pass{};
};

inline HupCertificate hup_certificate(const DensityMatrix& rho, const FockOperators& ops, double eig_tol = 1e-8) {
    const double me = rho.min_eigenvalue();
    if (me < -eig_tol) {
        std::ostringstream os;
        os << "hup_certificate: density matrix is indefinite (min eigenvalue " << me << ")";
        throw numerical_error(Reason::IndefiniteState, os.str());
    }
    const FockMoments m = moments_from_density(rho, ops);
    HupCertificate h;
    h.sigma_x = std::sqrt(std::max(m.xx - m.x * m.x, 0.0));
    h.sigma_p = std::sqrt(std::max(m.pp - m.p * m.p, 0.0));
    h.product = h.sigma_x * h.sigma_p;
    h.pass = h.product >= 0.5 - 1e-9;
    return h;
}

// ---- generators ------------------------------------------------------------

using Generator = std::function<CMat(const CMat&)>;

inline CMat comm(const CMat& A, const CMat& B) { return A * B - B * A; }
inline CMat anti(const CMat& A, const CMat& B) { return A * B + B * A; }

// -i[H, rho] + sum_ij kappa_ij (L_i rho L_j^dag - 1/2 {L_j^dag L_i, rho}),
// evaluated through H_eff = H - (i/2) sum kappa_ij L_j^dag L_i.
class LindbladGenerator {
public:
    LindbladGenerator(CMat H, std::vector<CMat> ops, CMat kappa)
        : H_(std::move(H)), L_(std::move(ops)), kappa_(std::move(kappa)) {
        const auto k = static_cast<Eigen::Index>(L_.size());
        if (kappa_.rows() != k || kappa_.cols() != k) throw validation_error("lindblad: kappa size mismatch");
        if (k > 0) {
            if ((kappa_ - kappa_.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + kappa_.cwiseAbs().maxCoeff()))
                throw validation_error("lindblad: kappa must be Hermitian");
            const Eigen::SelfAdjointEigenSolver<CMat> es(kappa_, Eigen::EigenvaluesOnly);
            if (es.eigenvalues().minCoeff() < -1e-12 * (1.0 + es.eigenvalues().cwiseAbs().maxCoeff()))
                throw validation_error("lindblad: kappa has a negative eigenvalue");
        }
        Heff_ = H_;
        for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = 0; j < k; ++j)
                if (kappa_(i, j) != 0.0) Heff_ -= cplx(0.0, 0.5) * kappa_(i, j) * (L_[j].adjoint() * L_[i]);
    }

    CMat operator()(const CMat& rho) const {
        CMat out = cplx(0.0, -1.0) * (Heff_ * rho) + cplx(0.0, 1.0) * (rho * Heff_.adjoint());
        for (std::size_t i = 0; i < L_.size(); ++i) {
            const CMat Lr = L_[i] * rho;
            for (std::size_t j = 0; j < L_.size(); ++j) {
                const cplx k = kappa_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                if (k != 0.0) out.noalias() += k * (Lr * L_[j].adjoint());
            }
        }
        return out;
    }

private:
    CMat H_;
    std::vector<CMat> L_;
    CMat kappa_;
    CMat Heff_;
};

inline CMat lindblad_rhs(const DensityMatrix& rho, const CMat& H, const std::vector<CMat>& ops, const CMat& kappa) {
    return LindbladGenerator(H, ops, kappa)(rho.data);
}

inline CMat system_hamiltonian(const FockOperators& f) { return 0.5 * (f.X2 + f.P2); }

// Linear-coupling Lindblad equation: H = H_S + (1 - r)(Gamma/2){X,P},
// single operator L = alpha X + beta P.
inline LindbladGenerator linear_lme_generator(const LinearLmeCoefficients& c, double r, const FockOperators& f) {
    const LindbladPair lp = lindblad_alpha_beta(c);
    const CMat H = system_hamiltonian(f) + (1.0 - r) * 0.5 * c.gamma * f.XP_anti;
    const CMat L = lp.alpha * f.X + lp.beta * f.P;
    return LindbladGenerator(H, {L}, CMat::Identity(1, 1));
}

// Born–Markov generator without the D_PP term and without the Hamiltonian
// shift; not of Lindblad form.
inline Generator bmme_generator(const LinearLmeCoefficients& c, const FockOperators& f) {
    const CMat H = system_hamiltonian(f);
    return [H, X = f.X, P = f.P, c](const CMat& rho) -> CMat {
        return cplx(0.0, -1.0) * comm(H, rho) - cplx(0.0, c.gamma) * comm(X, anti(P, rho)) -
               c.d_xp * comm(X, comm(P, rho)) - 0.5 * c.d_xx * comm(X, comm(X, rho));
    };
}

// Quadratic-coupling Lindblad equation in commutator form (the Hamiltonian
// shift is removed by its counter-term).
inline Generator quadratic_lme_generator(const QuadraticLmeCoefficients& q, const FockOperators& f) {
    const CMat H = system_hamiltonian(f);
    return [H, A = f.X2, S = f.XP_anti, B = f.P2, q](const CMat& rho) -> CMat {
        const CMat cA = comm(A, rho), cS = comm(S, rho), cB = comm(B, rho);
        const CMat aS = anti(S, rho), aB = anti(B, rho);
        CMat out = cplx(0.0, -1.0) * comm(H, rho);
        out -= 0.5 * q.d_mu * comm(A, cA) + 0.5 * q.d_nu * comm(S, cS) + 0.5 * q.d_eps * comm(B, cB);
        out -= q.d_munu * comm(A, cS) + q.d_mueps * comm(A, cB) + q.d_epsnu * comm(B, cS);
        out -= cplx(0.0, q.c_munu) * comm(A, aS) + cplx(0.0, q.c_mueps) * comm(A, aB) +
               cplx(0.0, q.c_epsnu) * comm(B, aS);
        return out;
    };
}

// ---- time evolution --------------------------------------------------------

enum class EvolveMethod { Auto, Rk4, Exponential };

struct EvolveOptions {
    double dt{0.005};
    int check_every{20};  // steps between eigenvalue / moment checks
    EvolveMethod method{EvolveMethod::Auto};
    int exponential_max_dim{40};
    double trunc_gate{1e-6};
};

struct EvolveReport {
    DensityMatrix final;
    double trace_err{};        // max |Tr rho - 1| over checks
    double hermiticity_err{};  // before re-Hermitization, max over checks
    double min_eig{};          // min over checks
    double min_eig_time{};
    double trunc_pop{};        // max population of the top two levels
    bool trusted{};
    bool used_exponential{};
    std::vector<double> times;
    std::vector<FockMoments> moments;
};

inline EvolveReport evolve_density(const DensityMatrix& rho0, const Generator& gen, double t_max,
                                   const FockOperators& ops, const EvolveOptions& o = {}) {
    rho0.validate(1e-10, 1e-8);
    if (!(t_max > 0.0) || !(o.dt > 0.0) || o.check_every < 1)
        throw validation_error("evolve_density: t_max, dt and check_every must be positive");
    const int N = rho0.dim();
    if (N != ops.dim) throw validation_error("evolve_density: operator and state dimensions differ");

    EvolveReport rep;
    rep.min_eig = std::numeric_limits<double>::infinity();
    CMat rho = rho0.data;
    double t = 0.0;

    const auto check = [&](double herm_before) {
        const DensityMatrix d{rho};
        rep.trace_err = std::max(rep.trace_err, d.trace_error());
        rep.hermiticity_err = std::max(rep.hermiticity_err, herm_before);
        const double me = d.min_eigenvalue();
        if (me < rep.min_eig) {
            rep.min_eig = me;
            rep.min_eig_time = t;
        }
        const double top = rho(N - 1, N - 1).real() + (N >= 2 ? rho(N - 2, N - 2).real() : 0.0);
        rep.trunc_pop = std::max(rep.trunc_pop, top);
        rep.times.push_back(t);
        rep.moments.push_back(moments_from_density(d, ops));
    };
    check(0.0);

    const bool use_exp = o.method == EvolveMethod::Exponential ||
                         (o.method == EvolveMethod::Auto && N <= o.exponential_max_dim);
    rep.used_exponential = use_exp;
    const double interval = o.dt * o.check_every;

    if (use_exp) {
        const Eigen::Index M = static_cast<Eigen::Index>(N) * N;
        CMat S(M, M);
        CMat E = CMat::Zero(N, N);
        for (int j = 0; j < N; ++j)
            for (int i = 0; i < N; ++i) {
                E(i, j) = 1.0;
                const CMat col = gen(E);
                S.col(static_cast<Eigen::Index>(j) * N + i) = Eigen::Map<const Eigen::VectorXcd>(col.data(), M);
                E(i, j) = 0.0;
            }
        const CMat prop = (S * interval).exp();
        while (t < t_max - 1e-12) {
            const double h = std::min(interval, t_max - t);
            Eigen::VectorXcd v = Eigen::Map<Eigen::VectorXcd>(rho.data(), M);
            v = (h == interval ? prop : CMat((S * h).exp())) * v;
            rho = Eigen::Map<CMat>(v.data(), N, N);
            const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
            rho = 0.5 * (rho + rho.adjoint());
            t += h;
            check(herm);
        }
    } else {
        int step = 0;
        double herm = 0.0;
        while (t < t_max - 1e-12) {
            const double h = std::min(o.dt, t_max - t);
            const CMat k1 = gen(rho);
            const CMat k2 = gen(rho + 0.5 * h * k1);
            const CMat k3 = gen(rho + 0.5 * h * k2);
            const CMat k4 = gen(rho + h * k3);
            rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            herm = std::max(herm, (rho - rho.adjoint()).cwiseAbs().maxCoeff());
            rho = 0.5 * (rho + rho.adjoint());
            t += h;
            if (++step % o.check_every == 0 || t >= t_max - 1e-12) {
                check(herm);
                herm = 0.0;
            }
        }
    }
    rep.final = DensityMatrix{rho};
    rep.trusted = rep.trunc_pop <= o.trunc_gate;
    return rep;
}

// ---- quadratic Lindblad operators (ladder form) -----------------------------

// L = alpha a^2 + beta a^dag^2 + gamma a^dag a + delta a + eps a^dag + eta
struct QuadraticLindbladOp {
    cplx alpha_t{}, beta_t{}, gamma_t{}, delta_t{}, eps_t{}, eta_t{};

    // mu X^2 + nu {X,P} + eps P^2 rewritten with ladder operators
    static QuadraticLindbladOp from_xp(cplx mu, cplx nu, cplx eps) {
        const cplx i(0.0, 1.0);
        return {0.5 * mu - i * nu - 0.5 * eps, 0.5 * mu + i * nu - 0.5 * eps, mu + eps, 0.0, 0.0,
                0.5 * (mu + eps)};
    }

    CMat matrix(const FockOperators& f) const {
        const CMat a1 = detail::lowering(f.dim + 1);
        const CMat d1 = a1.adjoint();
        const CMat quad = alpha_t * (a1 * a1) + beta_t * (d1 * d1) + gamma_t * (d1 * a1);
        return quad.topLeftCorner(f.dim, f.dim) + delta_t * f.a + eps_t * f.adag + eta_t * f.id;
    }
};

// u a + v a^dag + w
struct LadderLinear {
    cplx u{}, v{}, w{};

    CMat matrix(const FockOperators& f) const { return u * f.a + v * f.adag + w * f.id; }
};

// Product of two ladder-linear operators, exact on the N x N block.
inline CMat product_matrix(const LadderLinear& l, const LadderLinear& r, int dim) {
    const CMat a1 = detail::lowering(dim + 1);
    const CMat d1 = a1.adjoint();
    const CMat I1 = CMat::Identity(dim + 1, dim + 1);
    const CMat L = l.u * a1 + l.v * d1 + l.w * I1;
    const CMat R = r.u * a1 + r.v * d1 + r.w * I1;
    return (L * R).topLeftCorner(dim, dim);
}

struct EtaShift {
    QuadraticLindbladOp shifted;
    CMat delta_h;
};

// (H + delta_h, L') generates the same dynamics as (H, L), where L' has eta
// shifted by delta_eta.
inline EtaShift shift_eta(const QuadraticLindbladOp& L, cplx delta_eta, const FockOperators& f) {
    EtaShift out;
    out.shifted = L;
    out.shifted.eta_t += delta_eta;
    const CMat Lm = L.matrix(f);
    out.delta_h = cplx(0.0, 0.5) * (delta_eta * Lm.adjoint() - std::conj(delta_eta) * Lm);
    return out;
}

struct Factorization {
    LadderLinear d1;  // A a + B a^dag + C
    LadderLinear d2;  // a + D a^dag + E
    cplx eta_adjustment{};  // d1 d2 = L + eta_adjustment
};

inline Factorization factorize_quadratic(const QuadraticLindbladOp& L) {
    const cplx al = L.alpha_t, be = L.beta_t, ga = L.gamma_t;
    const double scale = std::max({std::abs(al), std::abs(be), std::abs(ga), 1e-300});
    if (std::abs(ga) <= 1e-14 * scale && std::abs(al * be) <= 1e-14 * scale * scale)
        throw numerical_error(Reason::FactorizationFailure,
                              "factorize_quadratic: non-generic operator (gamma = 0 and alpha beta = 0)");
    // B^2 - gamma B + alpha beta = 0
    const cplx root = std::sqrt(ga * ga - 4.0 * al * be);
    const cplx roots[2] = {0.5 * (ga + root), 0.5 * (ga - root)};
    for (const cplx B : roots) {
        if (std::abs(B) <= 1e-12 * scale) continue;
        const cplx D = be / B;
        // [alpha 1; B D] [E; C] = [delta; eps]
        const cplx det = al * D - B;
        if (std::abs(det) <= 1e-12 * std::max(std::abs(al * D), std::abs(B))) continue;
        const cplx E = (L.delta_t * D - L.eps_t) / det;
        const cplx C = (al * L.eps_t - B * L.delta_t) / det;
        Factorization fz;
        fz.d1 = {al, B, C};
        fz.d2 = {1.0, D, E};
        fz.eta_adjustment = al * D + C * E - L.eta_t;
        return fz;
    }
    throw numerical_error(Reason::FactorizationFailure, "factorize_quadratic: both roots give singular systems");
}

// ---- Gaussian approximation of the factorized dissipator ---------------------

// Second moments of the ladder operators for a zero-mean Gaussian state.
struct LadderMoments {
    double adag_a{};
    cplx a_a{};
};

inline LadderMoments ladder_moments(const GaussianState& s) {
    const SecondMoments m = to_moments(s);
    return {0.5 * (m.xx + m.pp - 1.0), cplx(0.5 * (m.xx - m.pp), m.xp)};
}

// <l^dag r> under a zero-mean Gaussian state
inline cplx pair_moment(const LadderLinear& l, const LadderLinear& r, const LadderMoments& lm) {
    const double aad = lm.adag_a + 1.0;
    return std::conj(l.u) * r.u * lm.adag_a + std::conj(l.u) * r.v * std::conj(lm.a_a) +
           std::conj(l.v) * r.u * lm.a_a + std::conj(l.v) * r.v * aad + std::conj(l.w) * r.w;
}

struct DissipatorMatrix {
    Eigen::Matrix2cd gamma;
    double min_eig{};
    bool psd{};
};

// Gamma~_ij = <d_j'^dag d_i'> with 1' = 2, 2' = 1.
inline DissipatorMatrix gaussian_dissipator_matrix(const LadderLinear& d1, const LadderLinear& d2,
                                                   const GaussianState& s, double tol = 1e-12) {
    if (!s.physical(1e-12)) throw validation_error("gaussian_dissipator_matrix: unphysical Gaussian state");
    const LadderMoments lm = ladder_moments(s);
    DissipatorMatrix out;
    out.gamma(0, 0) = pair_moment(d2, d2, lm);
    out.gamma(0, 1) = pair_moment(d1, d2, lm);
    out.gamma(1, 0) = pair_moment(d2, d1, lm);
    out.gamma(1, 1) = pair_moment(d1, d1, lm);
    const double a = out.gamma(0, 0).real(), d = out.gamma(1, 1).real();
    const double off = std::abs(out.gamma(0, 1));
    out.min_eig = 0.5 * (a + d) - std::sqrt(0.25 * (a - d) * (a - d) + off * off);
    out.psd = out.min_eig >= -tol * std::max(1.0, std::abs(a) + std::abs(d));
    return out;
}

// d<O>/dt contributed by the Gaussian-approximated dissipator: the two
// anomalous terms plus the Lindblad dissipator with matrix Gamma~. All
// averages are taken in rho.
inline cplx gaussian_generator_rate(const CMat& O, const CMat& d1, const CMat& d2, const CMat& rho) {
    const auto avg = [&](const CMat& M) { return (rho * M).trace(); };
    const CMat d12 = d1 * d2;
    const CMat d12h = d12.adjoint();
    const CMat d1h = d1.adjoint(), d2h = d2.adjoint();
    const cplx m12 = avg(d12), m12h = avg(d12h);
    CMat D = -0.5 * m12 * comm(d12h, rho) + 0.5 * m12h * comm(d12, rho);
    const CMat d[2] = {d1, d2};
    const CMat dh[2] = {d1h, d2h};
    // Gamma~_ij = <d_j'^dag d_i'>
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const cplx g = avg(dh[1 - j] * d[1 - i]);
            D += g * (d[i] * rho * dh[j] - 0.5 * anti(dh[j] * d[i], rho));
        }
    return (O * D).trace();
}

// h1 - (h2 + h3)/2 with each h replaced by its pair factorization.
inline cplx moment_level_rate(const CMat& O, const CMat& d1, const CMat& d2, const CMat& rho) {
    const auto avg = [&](const CMat& M) { return (rho * M).trace(); };
    const CMat d1h = d1.adjoint(), d2h = d2.adjoint();
    const cplx o = avg(O);
    cplx h1 = 0.0, h2 = 0.0, h3 = 0.0;
    // (l, r) = (d2^dag d1^dag, d1 d2)
    {
        const CMat l = d2h * d1h, r = d1 * d2;
        const cplx A = avg(l), B = avg(r);
        h1 += A * avg(O * r) + avg(l * O) * B - A * o * B;
        h2 += A * avg(O * r) + avg(O * l) * B - A * o * B;
        h3 += A * avg(r * O) + avg(l * O) * B - A * o * B;
    }
    // <d2^dag d1><d1^dag . d2> + <d2^dag . d1><d1^dag d2>
    {
        const cplx A = avg(d2h * d1), B = avg(d1h * d2);
        h1 += A * avg(d1h * O * d2) + avg(d2h * O * d1) * B - A * o * B;
        h2 += A * avg(O * d1h * d2) + avg(O * d2h * d1) * B - A * o * B;
        h3 += A * avg(d1h * d2 * O) + avg(d2h * d1 * O) * B - A * o * B;
    }
    // <d2^dag d2><d1^dag . d1> + <d2^dag . d2><d1^dag d1>
    {
        const cplx A = avg(d2h * d2), B = avg(d1h * d1);
        h1 += A * avg(d1h * O * d1) + avg(d2h * O * d2) * B - A * o * B;
        h2 += A * avg(O * d1h * d1) + avg(O * d2h * d2) * B - A * o * B;
        h3 += A * avg(d1h * d1 * O) + avg(d2h * d2 * O) * B - A * o * B;
    }
    return h1 - 0.5 * (h2 + h3);
}

} // namespace lqbm
