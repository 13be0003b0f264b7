#include "srnf/generators.hpp"
#include "srnf/profiles.hpp"
#include <cmath>

namespace srnflab {

std::pair<SurfaceImmersion, SurfaceImmersion> gen_cylinder_pair(double r, int nu, int nv) {
    if (!(r > 0)) throw InvalidParam("gen_cylinder_pair: r must be positive");
    SurfaceImmersion id;
    ParamPatch p({0, 2 * kPi, 0, 1}, nu, nv);
    p.periodic_u = true;
    for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nv; ++j) {
            double th = p.u_of(i), z = p.v_of(j);
            p.at(i, j) = Vec3(std::cos(th), std::sin(th), z);
        }
    // exact duplicate seam column
    for (int j = 0; j < nv; ++j) p.at(nu - 1, j) = p.at(0, j);
    id.patches.push_back(std::move(p));
    set_reference_density(id);
    id.validate();

    Mat3 L = Mat3::Zero();
    L(0, 0) = r;
    L(1, 1) = r;
    L(2, 2) = 1.0 / r;
    SurfaceImmersion img = id;
    for (auto& x : img.patches[0].pos) x = L * x;
    return {std::move(id), std::move(img)};
}

SurfaceImmersion gen_paraboloid(double a, double b, Rect box, int nu, int nv) {
    if (a == 0 || b == 0) throw InvalidParam("gen_paraboloid: a and b must be nonzero");
    SurfaceImmersion f;
    ParamPatch p(box, nu, nv);
    for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nv; ++j) {
            double x = p.u_of(i), y = p.v_of(j);
            p.at(i, j) = Vec3(x / a, y / b, x * x / a + y * y / b);
        }
    f.patches.push_back(std::move(p));
    f.validate();
    return f;
}

SurfaceImmersion gen_graph_patch(Rect box, int nu, int nv,
                                 const std::function<double(double, double)>& height) {
    SurfaceImmersion f;
    ParamPatch p(box, nu, nv);
    for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nv; ++j) {
            double x = p.u_of(i), y = p.v_of(j);
            p.at(i, j) = Vec3(x, y, height(x, y));
        }
    f.patches.push_back(std::move(p));
    f.validate();
    return f;
}

namespace {

// Equiangular cube face: unit direction for face `face` at angles (u,v), each
// in [-π/4, π/4].  Axis tables chosen so ∂u×∂v points outward on every face.
Vec3 cube_dir(int face, double u, double v) {
    double tu = std::tan(u), tv = std::tan(v);
    Vec3 d;
    switch (face) {
        case 0: d = Vec3(tu, tv, 1); break;   // +z
        case 1: d = Vec3(tu, -tv, -1); break; // -z
        case 2: d = Vec3(1, tu, tv); break;   // +x
        case 3: d = Vec3(-1, -tu, tv); break; // -x
        case 4: d = Vec3(tv, 1, tu); break;   // +y
        case 5: d = Vec3(tu, -1, tv); break;  // -y
        default: throw InvalidParam("cube_dir: bad face");
    }
    return d.normalized();
}

SurfaceImmersion sphere_grid(int n, const std::function<Vec3(const Vec3&)>& embed) {
    if (n < 9) throw InvalidParam("sphere grids need at least 9 samples per axis");
    SurfaceImmersion f;
    Rect dom{-kPi / 4, kPi / 4, -kPi / 4, kPi / 4};
    for (int face = 0; face < 6; ++face) {
        ParamPatch p(dom, n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) p.at(i, j) = embed(cube_dir(face, p.u_of(i), p.v_of(j)));
        f.patches.push_back(std::move(p));
    }
    f.seams = auto_build_seams(f, 1e-9 * f.bbox_diag());
    return f;
}

} // namespace

SurfaceImmersion gen_sphere(int n) {
    SurfaceImmersion f = sphere_grid(n, [](const Vec3& u) { return u; });
    set_reference_density(f);
    f.validate();
    if (!f.is_closed()) throw SpecInvalid("sphere assembly failed to close");
    return f;
}

SurfaceImmersion gen_linear_image(const SurfaceImmersion& reference, const Mat3& A) {
    if (std::abs(A.determinant()) < 1e-12) throw InvalidParam("gen_linear_image: matrix not invertible");
    SurfaceImmersion f = reference;
    for (auto& p : f.patches)
        for (auto& x : p.pos) x = A * x;
    f.validate();
    return f;
}

SurfaceImmersion gen_ellipsoid(double a, double b, double c, int n) {
    Mat3 A = Mat3::Zero();
    A(0, 0) = a;
    A(1, 1) = b;
    A(2, 2) = c;
    return gen_linear_image(gen_sphere(n), A);
}

SurfaceImmersion gen_bumped_sphere(int n, double amp, const Vec3& dir, double width) {
    if (!(width > 0)) throw InvalidParam("gen_bumped_sphere: width must be positive");
    SurfaceImmersion sphere = gen_sphere(n);
    Vec3 d = dir.normalized();
    SurfaceImmersion f = sphere_grid(n, [&](const Vec3& u) {
        double ang = std::acos(std::min(1.0, std::max(-1.0, u.dot(d))));
        return (1.0 + amp * cinf_bump(ang / width)) * u;
    });
    for (std::size_t p = 0; p < f.patches.size(); ++p) f.patches[p].density = sphere.patches[p].density;
    f.validate();
    return f;
}

SurfaceImmersion gen_perturbed_sphere(int n, std::uint64_t seed, double amp) {
    SurfaceImmersion sphere = gen_sphere(n);
    Rng rng(seed);
    std::vector<Vec3> dirs;
    std::vector<double> amps, widths;
    for (int k = 0; k < 6; ++k) {
        dirs.push_back(rng.normal3().normalized());
        amps.push_back(amp * rng.uniform(-1.0, 1.0));
        widths.push_back(rng.uniform(0.4, 0.9));
    }
    SurfaceImmersion f = sphere_grid(n, [&](const Vec3& u) {
        double r = 1.0;
        for (std::size_t k = 0; k < dirs.size(); ++k) {
            double ang = std::acos(std::min(1.0, std::max(-1.0, u.dot(dirs[k]))));
            r += amps[k] * cinf_bump(ang / widths[k]);
        }
        return r * u;
    });
    for (std::size_t p = 0; p < f.patches.size(); ++p) f.patches[p].density = sphere.patches[p].density;
    // normalize total finite-difference area to the reference sphere's
    auto cross_f = tangent_cross(f);
    double area_f = 0, area_s = 0;
    for (std::size_t p = 0; p < f.patches.size(); ++p)
        for (std::size_t k = 0; k < f.patches[p].size(); ++k) {
            area_f += cross_f[p][k].norm() * f.patches[p].weight[k];
            area_s += sphere.patches[p].density[k] * sphere.patches[p].weight[k];
        }
    double scale = std::sqrt(area_s / area_f);
    for (auto& p : f.patches)
        for (auto& x : p.pos) x *= scale;
    f.validate();
    return f;
}

SurfaceImmersion gen_convex_blob(int n, const std::vector<SupportBump>& bumps) {
    SurfaceImmersion sphere = gen_sphere(n);
    // X(u) = ∇H(u) for H(x) = |x|·h(x/|x|), evaluated at |u| = 1:
    //   X = u + Σ c [4(u·a)³ a − 3(u·a)⁴ u]
    SurfaceImmersion f = sphere_grid(n, [&](const Vec3& u) {
        Vec3 x = u;
        for (const auto& bump : bumps) {
            Vec3 a = bump.axis.normalized();
            double s = u.dot(a);
            double s3 = s * s * s;
            x += bump.c * (4 * s3 * a - 3 * s3 * s * u);
        }
        return x;
    });
    for (std::size_t p = 0; p < f.patches.size(); ++p) f.patches[p].density = sphere.patches[p].density;
    f.validate();
    return f;
}

} // namespace srnflab
