#include "core/physics.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace thbx {

double magnetization_integrand(const PhysicsProblem& problem, const Vec2& x,
                               const MaterialParams& mat, const Vec2& grad_test) {
    const Vec2 br = problem.remanence ? problem.remanence(x, mat) : Vec2::Zero();
    if (br.x() == 0.0 && br.y() == 0.0) return 0.0;
    const double nu = problem.nu(x, mat);
    return nu * (br.x() * grad_test.y() - br.y() * grad_test.x());
}

PhysicsProblem poisson_peak_problem() {
    constexpr double alpha = 100.0;
    PhysicsProblem p;
    p.name = "poisson_peak";
    p.nu = [](const Vec2&, const MaterialParams&) { return 1.0; };
    const auto u = [](const Vec2& x) {
        const double r2 = (x.x() - 0.5) * (x.x() - 0.5) + (x.y() - 0.5) * (x.y() - 0.5);
        return std::exp(-alpha * r2);
    };
    p.source = [u](const Vec2& x, const MaterialParams&) {
        const double r2 = (x.x() - 0.5) * (x.x() - 0.5) + (x.y() - 0.5) * (x.y() - 0.5);
        return 4.0 * alpha * (1.0 - alpha * r2) * u(x);
    };
    p.remanence = nullptr;
    p.dirichlet = [u](const Vec2& x) { return u(x); };
    p.has_exact = true;
    p.exact = [u](const Vec2& x) { return u(x); };
    p.exact_grad = [u](const Vec2& x) {
        return Vec2(-2.0 * alpha * (x.x() - 0.5) * u(x), -2.0 * alpha * (x.y() - 0.5) * u(x));
    };
    return p;
}

PhysicsProblem magnetostatic_problem() {
    PhysicsProblem p;
    p.name = "magnetostatic";
    p.nu = [](const Vec2&, const MaterialParams& m) {
        return 1.0 / (vacuum_permeability * m.mu_r);
    };
    p.source = [](const Vec2&, const MaterialParams& m) { return m.jz; };
    p.remanence = [](const Vec2&, const MaterialParams& m) { return m.br; };
    p.dirichlet = [](const Vec2&) { return 0.0; };  // flux wall
    p.has_exact = false;
    return p;
}

std::map<std::string, MaterialParams> magnetostatic_default_materials() {
    std::map<std::string, MaterialParams> mats;
    mats["air"] = {1.0, Vec2(0.0, 0.0), 0.0};
    mats["iron"] = {2000.0, Vec2(0.0, 0.0), 0.0};
    mats["magnet"] = {1.05, Vec2(0.0, 1.2), 0.0};
    return mats;
}

MultipatchDomain horseshoe_domain(const std::string& geometry_path) {
    MultipatchDomain domain = read_geometry_file(geometry_path);
    const auto defaults = magnetostatic_default_materials();
    for (auto& [tag, params] : domain.materials) {
        const auto it = defaults.find(tag);
        if (it != defaults.end()) params = it->second;
    }
    return domain;
}

double SolutionField::value(int patch, double xi, double eta) const {
    const HierarchicalSpace& hs = domain->patches[static_cast<std::size_t>(patch)].space;
    const HierEvalResult r = hs.eval(xi, eta);
    double val = 0.0;
    for (std::size_t k = 0; k < r.functions.size(); ++k)
        val += r.values[static_cast<int>(k)] *
               coeffs[dofmap->global_of(*domain, patch, r.functions[k])];
    return val;
}

void SolutionField::sample(int patch, double xi, double eta, double& val, Vec2& grad,
                           Vec2& pos) const {
    const Patch& P = domain->patches[static_cast<std::size_t>(patch)];
    const HierEvalResult r = P.space.eval(xi, eta);
    val = 0.0;
    Vec2 gpar = Vec2::Zero();
    for (std::size_t k = 0; k < r.functions.size(); ++k) {
        const double c = coeffs[dofmap->global_of(*domain, patch, r.functions[k])];
        val += c * r.values[static_cast<int>(k)];
        gpar.x() += c * r.grad_u[static_cast<int>(k)];
        gpar.y() += c * r.grad_v[static_cast<int>(k)];
    }
    Eigen::Matrix2d J;
    pos = P.geometry.map(xi, eta, &J);
    grad = J.transpose().fullPivLu().solve(gpar);
}

std::vector<FieldSample> postprocess_B(const SolutionField& field, int patch, int resolution) {
    if (resolution < 2)
        throw validation_error("postprocess_B: resolution must be at least 2 per direction");
    const Patch& P = field.domain->patches[static_cast<std::size_t>(patch)];
    const auto& ku = P.space.level_space(0).u().kv();
    const auto& kv = P.space.level_space(0).v().kv();
    std::vector<FieldSample> out;
    out.reserve(static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution));
    for (int j = 0; j < resolution; ++j)
        for (int i = 0; i < resolution; ++i) {
            const double xi = ku.domain_min() + (ku.domain_max() - ku.domain_min()) *
                                                    static_cast<double>(i) / (resolution - 1);
            const double eta = kv.domain_min() + (kv.domain_max() - kv.domain_min()) *
                                                     static_cast<double>(j) / (resolution - 1);
            FieldSample s;
            double val;
            Vec2 grad;
            field.sample(patch, xi, eta, val, grad, s.position);
            s.az = val;
            s.b = Vec2(grad.y(), -grad.x());
            s.level = P.space.element_at(xi, eta).level;
            out.push_back(s);
        }
    return out;
}

}  // namespace thbx
