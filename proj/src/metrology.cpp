#include "obstrade/metrology.hpp"

#include <algorithm>
#include <cmath>

#include "obstrade/instances.hpp"

namespace obstrade {

namespace {

constexpr double kSupportTol = 1e-12;
constexpr double kZeroProb = 1e-12;
constexpr int kMaxCollectiveDim = 256;

CMat bloch_rho(const RVec& r) {
    return 0.5 * (CMat::Identity(2, 2) + r(0) * pauli_x() + r(1) * pauli_y() + r(2) * pauli_z());
}

CMat bloch_op(const RVec& v) { return v(0) * pauli_x() + v(1) * pauli_y() + v(2) * pauli_z(); }

void require_params(const RVec& x, int n, const std::string& name) {
    if (x.size() != n)
        throw ValidationError(name + " expects " + std::to_string(n) + " parameters, got " +
                              std::to_string(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (!std::isfinite(x(i))) throw ValidationError(name + ": non-finite parameter");
}

// Amplitudes of the three-qubit family as trigonometric monomials.
struct Factor {
    enum Kind { sin_t, cos_t, phase } kind;
    int param;  // index into (t0..t4, p0..p4)
};
struct Monomial {
    int basis;
    std::vector<Factor> factors;
};

const std::vector<Monomial>& three_qubit_terms() {
    using F = Factor;
    static const std::vector<Monomial> terms = {
        {0b001, {{F::sin_t, 0}, {F::sin_t, 1}, {F::sin_t, 2}}},
        {0b010, {{F::sin_t, 0}, {F::sin_t, 1}, {F::cos_t, 2}, {F::phase, 6}}},
        {0b100, {{F::sin_t, 0}, {F::cos_t, 1}, {F::phase, 7}}},
        {0b110, {{F::cos_t, 0}, {F::phase, 5}, {F::sin_t, 3}, {F::sin_t, 4}}},
        {0b101, {{F::cos_t, 0}, {F::phase, 5}, {F::sin_t, 3}, {F::cos_t, 4}, {F::phase, 8}}},
        {0b011, {{F::cos_t, 0}, {F::phase, 5}, {F::cos_t, 3}, {F::phase, 9}}},
    };
    return terms;
}

cplx factor_value(const Factor& f, const RVec& x) {
    switch (f.kind) {
        case Factor::sin_t:
            return std::sin(x(f.param));
        case Factor::cos_t:
            return std::cos(x(f.param));
        case Factor::phase:
            break;
    }
    return std::exp(cplx(0, x(f.param)));
}

cplx factor_derivative(const Factor& f, const RVec& x) {
    switch (f.kind) {
        case Factor::sin_t:
            return std::cos(x(f.param));
        case Factor::cos_t:
            return -std::sin(x(f.param));
        case Factor::phase:
            break;
    }
    return cplx(0, 1) * std::exp(cplx(0, x(f.param)));
}

CVec three_qubit_ket(const RVec& x, int diff = -1) {
    CVec psi = CVec::Zero(8);
    for (const Monomial& m : three_qubit_terms()) {
        if (diff < 0) {
            cplx a = 1.0;
            for (const Factor& f : m.factors) a *= factor_value(f, x);
            psi(m.basis) += a;
            continue;
        }
        for (size_t i = 0; i < m.factors.size(); ++i) {
            if (m.factors[i].param != diff) continue;
            cplx a = factor_derivative(m.factors[i], x);
            for (size_t k = 0; k < m.factors.size(); ++k)
                if (k != i) a *= factor_value(m.factors[k], x);
            psi(m.basis) += a;
        }
    }
    return psi;
}

CMat kron_power(const CMat& a, int p) {
    CMat out = a;
    for (int i = 1; i < p; ++i) out = kron(out, a);
    return out;
}

double normalized_norm(const RMat& f_q, const RMat& s) {
    if (f_q.rows() != s.rows() || f_q.cols() != s.cols() || f_q.rows() != f_q.cols())
        throw ValidationError("F_Q and S_Im must be square of the same size");
    const RMat r = spd_inv_sqrt(f_q);
    return (r * s * r).norm();
}

}  // namespace

State ParamFamily::at(const RVec& x) const {
    if (x.size() != n_params) throw ValidationError(name + ": wrong parameter count");
    return state(x);
}

std::vector<CMat> ParamFamily::drho(const RVec& x) const {
    if (x.size() != n_params) throw ValidationError(name + ": wrong parameter count");
    if (derivative) return derivative(x);
    return drho_numeric(x, h, false);
}

std::vector<CMat> ParamFamily::drho_numeric(const RVec& x, double step, bool richardson) const {
    auto central = [&](double hh) {
        std::vector<CMat> out;
        for (int j = 0; j < n_params; ++j) {
            RVec xp = x, xm = x;
            xp(j) += hh;
            xm(j) -= hh;
            out.push_back((state(xp).rho() - state(xm).rho()) / (2.0 * hh));
        }
        return out;
    };
    std::vector<CMat> d = central(step);
    if (!richardson) return d;
    const std::vector<CMat> half = central(0.5 * step);
    for (size_t j = 0; j < d.size(); ++j) d[j] = (4.0 * half[j] - d[j]) / 3.0;
    return d;
}

CMat sld(const State& rho, const CMat& drho) {
    require_hermitian(drho, "d rho");
    if (drho.rows() != rho.dim()) throw ValidationError("d rho dimension does not match the state");
    if (std::abs(drho.trace()) > 1e-8 * std::max(1.0, drho.norm()))
        throw ValidationError("d rho must be traceless");
    const EigResult e = eig_hermitian(rho.rho());
    const CMat d = e.vectors.adjoint() * drho * e.vectors;
    const int n = rho.dim();
    const double tol = 1e-8 * std::max(1.0, drho.norm());
    CMat l = CMat::Zero(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const double s = std::max(0.0, e.values(a)) + std::max(0.0, e.values(b));
            if (s > kSupportTol)
                l(a, b) = 2.0 * d(a, b) / s;
            else if (std::abs(d(a, b)) > tol)
                throw ValidationError(
                    "d rho has weight on the kernel of rho; no SLD exists at this point");
        }
    return e.vectors * l * e.vectors.adjoint();
}

std::vector<CMat> slds(const ParamFamily& f, const RVec& x) {
    const State rho = f.at(x);
    std::vector<CMat> out;
    for (const CMat& d : f.drho(x)) out.push_back(sld(rho, d));
    return out;
}

RMat qfi_matrix(const State& rho, const std::vector<CMat>& l) {
    const int n = static_cast<int>(l.size());
    RMat f(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = j; k < n; ++k) {
            f(j, k) = trace_prod(rho.rho(), l[static_cast<size_t>(j)] * l[static_cast<size_t>(k)]).real();
            f(k, j) = f(j, k);
        }
    return f;
}

RMat sld_imaginary_moments(const State& rho, const std::vector<CMat>& l) {
    const int n = static_cast<int>(l.size());
    RMat s = RMat::Zero(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
            s(j, k) = trace_prod(rho.rho(), l[static_cast<size_t>(j)] * l[static_cast<size_t>(k)]).imag();
            s(k, j) = -s(j, k);
        }
    return s;
}

RMat cfi_matrix(const ParamFamily& f, const Povm& povm, const RVec& x) {
    const State rho = f.at(x);
    if (povm.dim() != rho.dim()) throw ValidationError("POVM dimension does not match the family");
    const std::vector<CMat> d = f.drho(x);
    const int n = f.n_params;
    RMat fc = RMat::Zero(n, n);
    for (int m = 0; m < povm.size(); ++m) {
        const double p = trace_prod(rho.rho(), povm[m]).real();
        RVec dp(n);
        for (int j = 0; j < n; ++j) dp(j) = trace_prod(d[static_cast<size_t>(j)], povm[m]).real();
        if (p < kZeroProb) {
            if (dp.cwiseAbs().maxCoeff() > 1e-8)
                throw ValidationError("outcome " + std::to_string(m) +
                                      " has vanishing probability but nonzero derivative; "
                                      "classical Fisher information is singular");
            continue;
        }
        fc += dp * dp.transpose() / p;
    }
    return fc;
}

std::vector<CMat> reparameterize(const std::vector<CMat>& l, const RMat& f_q) {
    const RMat r = spd_inv_sqrt(f_q);
    const int n = static_cast<int>(l.size());
    std::vector<CMat> out;
    for (int k = 0; k < n; ++k) {
        CMat t = CMat::Zero(l[0].rows(), l[0].cols());
        for (int j = 0; j < n; ++j) t += r(j, k) * l[static_cast<size_t>(j)];
        out.push_back(t);
    }
    return out;
}

double metrology_bound_analytic(const RMat& f_q, const RMat& s_im_tilde) {
    const double t = std::sqrt(normalized_norm(f_q, s_im_tilde) + 1.0) - 1.0;
    return static_cast<double>(f_q.rows()) - t * t;
}

double metrology_pairwise_ceiling(const RMat& f_q, const RMat& s_im) {
    const double n = static_cast<double>(f_q.rows());
    if (n < 2) return n;
    const double nn = normalized_norm(f_q, s_im);
    return n - nn * nn / (2.0 * (n - 1.0));
}

MetrologySdp metrology_bound_sdp(const State& rho, const std::vector<CMat>& l,
                                 const sdp::Settings& settings) {
    const RMat f_q = qfi_matrix(rho, l);
    const ObservableSet lt(reparameterize(l, f_q), false);
    MetrologySdp out;
    out.e0 = bound_e0(rho, lt, RMat::Identity(lt.size(), lt.size()), settings);
    out.value = lt.size() - out.e0.value;
    return out;
}

double metrology_bound_two_param(const State& rho, const CMat& l1, const CMat& l2, double w1,
                                 double w2, const std::optional<BasisChoice>& basis) {
    return bound_mixed_pair_EA(rho, l1, l2, w1, w2, basis).value;
}

ParamFamily collectivize(const ParamFamily& f, int copies) {
    if (copies < 1) throw ValidationError("collectivize needs at least one copy");
    if (copies == 1) return f;
    ParamFamily out = f;
    out.name = f.name + "^" + std::to_string(copies);
    out.state = [f, copies](const RVec& x) {
        const CMat r = f.at(x).rho();
        if (std::pow(static_cast<double>(r.rows()), copies) > kMaxCollectiveDim)
            throw ValidationError("collective dimension d^p exceeds " +
                                  std::to_string(kMaxCollectiveDim));
        return State(kron_power(r, copies));
    };
    out.derivative = [f, copies](const RVec& x) {
        const CMat r = f.at(x).rho();
        if (std::pow(static_cast<double>(r.rows()), copies) > kMaxCollectiveDim)
            throw ValidationError("collective dimension d^p exceeds " +
                                  std::to_string(kMaxCollectiveDim));
        std::vector<CMat> out;
        for (const CMat& d : f.drho(x)) {
            CMat total;
            for (int pos = 0; pos < copies; ++pos) {
                CMat term = pos == 0 ? d : r;
                for (int k = 1; k < copies; ++k) term = kron(term, k == pos ? d : r);
                total = pos == 0 ? term : CMat(total + term);
            }
            out.push_back(total);
        }
        return out;
    };
    return out;
}

ParamFamily restrict_family(const ParamFamily& f, const RVec& base,
                            const std::vector<int>& active) {
    require_params(base, f.n_params, f.name);
    if (active.empty()) throw ValidationError("restrict_family needs at least one active parameter");
    for (int a : active)
        if (a < 0 || a >= f.n_params) throw ValidationError("active parameter index out of range");
    ParamFamily out;
    out.name = f.name;
    out.n_params = static_cast<int>(active.size());
    out.h = f.h;
    for (int a : active)
        out.param_names.push_back(a < static_cast<int>(f.param_names.size())
                                      ? f.param_names[static_cast<size_t>(a)]
                                      : "x" + std::to_string(a));
    auto embed = [base, active](const RVec& y) {
        RVec x = base;
        for (size_t i = 0; i < active.size(); ++i) x(active[i]) = y(static_cast<Eigen::Index>(i));
        return x;
    };
    out.state = [f, embed](const RVec& y) { return f.at(embed(y)); };
    out.derivative = [f, embed, active](const RVec& y) {
        const std::vector<CMat> all = f.drho(embed(y));
        std::vector<CMat> sel;
        for (int a : active) sel.push_back(all[static_cast<size_t>(a)]);
        return sel;
    };
    return out;
}

namespace families {

ParamFamily qubit_bloch() {
    ParamFamily f;
    f.name = "qubit_bloch";
    f.n_params = 3;
    f.param_names = {"lambda", "theta", "phi"};
    auto check = [](const RVec& x) {
        require_params(x, 3, "qubit_bloch");
        if (std::abs(x(0)) > 1.0) throw ValidationError("qubit_bloch: |lambda| must be <= 1");
    };
    f.state = [check](const RVec& x) {
        check(x);
        const double l = x(0), t = x(1), p = x(2);
        RVec r(3);
        r << l * std::sin(t) * std::cos(p), l * std::sin(t) * std::sin(p), l * std::cos(t);
        return State(bloch_rho(r));
    };
    f.derivative = [check](const RVec& x) {
        check(x);
        const double l = x(0), t = x(1), p = x(2);
        RVec n(3), dt(3), dp(3);
        n << std::sin(t) * std::cos(p), std::sin(t) * std::sin(p), std::cos(t);
        dt << std::cos(t) * std::cos(p), std::cos(t) * std::sin(p), -std::sin(t);
        dp << -std::sin(t) * std::sin(p), std::sin(t) * std::cos(p), 0.0;
        return std::vector<CMat>{0.5 * bloch_op(n), 0.5 * l * bloch_op(dt), 0.5 * l * bloch_op(dp)};
    };
    return f;
}

ParamFamily three_qubit() {
    ParamFamily f;
    f.name = "three_qubit";
    f.n_params = 10;
    f.param_names = {"theta0", "theta1", "theta2", "theta3", "theta4",
                     "phi0",   "phi1",   "phi2",   "phi3",   "phi4"};
    f.state = [](const RVec& x) {
        require_params(x, 10, "three_qubit");
        return State::pure(three_qubit_ket(x));
    };
    f.derivative = [](const RVec& x) {
        require_params(x, 10, "three_qubit");
        const CVec psi = three_qubit_ket(x);
        std::vector<CMat> out;
        for (int j = 0; j < 10; ++j) {
            const CVec d = three_qubit_ket(x, j);
            const CMat t = d * psi.adjoint();
            out.push_back(t + t.adjoint());
        }
        return out;
    };
    return f;
}

ParamFamily spin1_p() {
    ParamFamily f;
    f.name = "spin1_p";
    f.n_params = 1;
    f.param_names = {"p"};
    f.state = [](const RVec& x) {
        require_params(x, 1, "spin1_p");
        if (x(0) < 0.0 || x(0) > 1.0) throw ValidationError("spin1_p: p must lie in [0, 1]");
        return instances::spin1_state(x(0));
    };
    f.derivative = [](const RVec& x) {
        require_params(x, 1, "spin1_p");
        RVec d(3);
        d << 0.5, -1.0, 0.5;
        return std::vector<CMat>{d.cast<cplx>().asDiagonal().toDenseMatrix()};
    };
    return f;
}

}  // namespace families

std::map<std::string, ParamFamily> builtin_families() {
    return {{"qubit_bloch", families::qubit_bloch()},
            {"three_qubit", families::three_qubit()},
            {"spin1_p", families::spin1_p()}};
}

std::pair<ParamFamily, RVec> family_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("family") || !j.contains("params"))
        throw ValidationError("metrology input needs \"family\" and \"params\"");
    const auto reg = builtin_families();
    const std::string name = j.at("family").get<std::string>();
    const auto it = reg.find(name);
    if (it == reg.end()) throw ValidationError("unknown family '" + name + "'");
    const std::vector<double> p = j.at("params").get<std::vector<double>>();
    RVec x = Eigen::Map<const RVec>(p.data(), static_cast<Eigen::Index>(p.size()));
    require_params(x, it->second.n_params, name);
    ParamFamily f = it->second;
    if (j.contains("active")) {
        std::vector<int> active;
        for (const auto& a : j.at("active")) {
            if (a.is_number_integer()) {
                active.push_back(a.get<int>());
                continue;
            }
            const std::string s = a.get<std::string>();
            const auto pos = std::find(f.param_names.begin(), f.param_names.end(), s);
            if (pos == f.param_names.end()) throw ValidationError("unknown parameter '" + s + "'");
            active.push_back(static_cast<int>(pos - f.param_names.begin()));
        }
        const RVec base = x;
        f = restrict_family(f, base, active);
        x.resize(static_cast<Eigen::Index>(active.size()));
        for (size_t i = 0; i < active.size(); ++i) x(static_cast<Eigen::Index>(i)) = base(active[i]);
    }
    if (j.contains("copies")) f = collectivize(f, j.at("copies").get<int>());
    return {f, x};
}

nlohmann::json MetrologyReport::to_json() const {
    nlohmann::json fq = nlohmann::json::array();
    for (Eigen::Index i = 0; i < f_q.rows(); ++i) {
        std::vector<double> row;
        for (Eigen::Index k = 0; k < f_q.cols(); ++k) row.push_back(f_q(i, k));
        fq.push_back(row);
    }
    return {{"f_q", fq},
            {"analytic", analytic},
            {"sdp", sdp},
            {"sdp_status", sdp::to_string(sdp_status)},
            {"pairwise_ea", pairwise_ea},
            {"pairwise_ceiling", pairwise_ceiling}};
}

MetrologyReport metrology_report(const ParamFamily& f, const RVec& x, const sdp::Settings& settings) {
    const State rho = f.at(x);
    const std::vector<CMat> l = slds(f, x);
    MetrologyReport rep;
    rep.f_q = qfi_matrix(rho, l);
    const int n = f.n_params;
    const RMat eye = RMat::Identity(n, n);
    const ObservableSet lt(reparameterize(l, rep.f_q), false);
    RMat s_tilde;
    if (rho.dim() == 2) {
        s_tilde = moment_data(rho, lt, qubit_optimal_basis(rho, lt).basis).s_im_tilde;
    } else if (rho.is_pure()) {
        s_tilde = sld_imaginary_moments(rho, lt.ops());
    } else {
        const BasisChoice comp = BasisChoice::computational(rho.dim());
        const BoundReport b = bound_multi_analytic_search(rho, lt, comp.vectors);
        BasisChoice chosen = comp;
        chosen.transpose_flags = b.witness["transpose_flags"].get<std::vector<bool>>();
        s_tilde = moment_data(rho, lt, chosen).s_im_tilde;
    }
    rep.analytic = metrology_bound_analytic(eye, s_tilde);
    rep.pairwise_ceiling = metrology_pairwise_ceiling(eye, s_tilde);
    rep.pairwise_ea = n < 2 ? n : n - pairwise_sum_bound(rho, lt, eye, PairMethod::ea).value;
    const MetrologySdp s = metrology_bound_sdp(rho, l, settings);
    rep.sdp = s.value;
    rep.sdp_status = s.e0.status;
    return rep;
}

}  // namespace obstrade
