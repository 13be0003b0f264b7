// srnf_lab: command-line front end for the SRNF laboratory.
//
// Subcommands: gen, srnf, dist, moser, verify, report.
// Exit codes: 0 = success, 2 = check failure, 3 = input error,
//             4 = numerical-stage failure.

#include "srnf/alignment.hpp"
#include "srnf/assembly.hpp"
#include "srnf/curvature.hpp"
#include "srnf/generators.hpp"
#include "srnf/hash.hpp"
#include "srnf/io.hpp"
#include "srnf/metric.hpp"
#include "srnf/moser.hpp"
#include "srnf/reparam.hpp"
#include "srnf/rng.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace srnflab;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string iso_now() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

// Records command, parameters, inputs and output digests; written last so the
// digests cover the final artifacts.
class RunManifest {
  public:
    RunManifest(const std::string& command, const std::string& out_dir) : dir_(out_dir) {
        fs::create_directories(dir_);
        j_["tool"] = "srnf_lab";
        j_["version"] = kVersion;
        j_["command"] = command;
        j_["timestamp"] = iso_now();
        j_["parameters"] = Json::object();
        j_["inputs"] = Json::array();
        j_["outputs"] = Json::array();
    }

    void param(const std::string& key, const Json& v) { j_["parameters"][key] = v; }
    void seed(std::uint64_t s) { j_["seed"] = s; }

    void input(const std::string& path) {
        j_["inputs"].push_back({{"path", path}, {"sha256", sha256_file_hex(path)}});
    }

    // Registers an output file that already exists on disk.
    void output(const std::string& path) {
        j_["outputs"].push_back({{"path", path}, {"sha256", sha256_file_hex(path)}});
    }

    void write() { save_json(dir_ + "/manifest.json", j_); }

  private:
    Json j_;
    std::string dir_;
};

// Surface container writer: JSON manifest + payload binaries + OBJ preview.
// Returns every file written (payload names derive from the manifest name).
std::vector<std::string> emit_surface(const std::string& dir, const std::string& stem,
                                      const SurfaceImmersion& surf) {
    std::vector<std::string> files;
    std::string manifest = dir + "/" + stem + ".json";
    save_surface(manifest, surf);
    files.push_back(manifest);
    for (std::size_t p = 0; p < surf.patches.size(); ++p) {
        files.push_back(dir + "/" + stem + ".p" + std::to_string(p) + ".pos.f64");
        files.push_back(dir + "/" + stem + ".p" + std::to_string(p) + ".rw.f64");
    }
    std::string obj = dir + "/" + stem + ".obj";
    save_obj(obj, surf);
    files.push_back(obj);
    return files;
}

Json distance_report(const SurfaceImmersion& a, const SurfaceImmersion& b, bool certify) {
    SrnfField qa = srnf(a), qb = srnf(b);
    Json rep;
    rep["distance"] = srnf_distance(qa, qb);
    rep["field_norm"] = qa.norm();
    rep["relative_distance"] = qa.norm() > 0 ? srnf_distance(qa, qb) / qa.norm() : 0.0;
    rep["samplewise_max_dev"] = samplewise_max_dev(qa, qb);
    if (certify) {
        AlignmentReport al = certify_noncongruent(a, b);
        Json alj;
        alj["congruent"] = al.congruent;
        alj["rms_residual"] = al.rms_residual;
        alj["threshold"] = al.threshold;
        alj["rotation"] = Json::array();
        for (int r = 0; r < 3; ++r)
            alj["rotation"].push_back({al.best_motion.R(r, 0), al.best_motion.R(r, 1), al.best_motion.R(r, 2)});
        alj["translation"] = {al.best_motion.t.x(), al.best_motion.t.y(), al.best_motion.t.z()};
        rep["alignment"] = alj;
    }
    return rep;
}

Vec2 json_vec2(const Json& j) {
    if (!j.is_array() || j.size() != 2) throw SpecInvalid("expected a 2-vector [x, y]");
    return Vec2(j[0].get<double>(), j[1].get<double>());
}

Circle json_circle(const Json& j) {
    if (!j.contains("center") || !j.contains("radius")) throw SpecInvalid("circle needs center and radius");
    return Circle{json_vec2(j["center"]), j["radius"].get<double>()};
}

// Shared by `gen chessboard`, `moser`, and `report detj`.
struct PlaceSpec {
    FlatPlace place;
    std::vector<Vec2> translations;
    double mesh_h = 0.05;
    double collar_width = 0.04;
};

PlaceSpec parse_place_spec(const Json& j) {
    PlaceSpec out;
    if (!j.contains("outer") || !j.contains("holes") || !j.contains("translations"))
        throw SpecInvalid("place spec needs outer, holes, translations");
    out.place.outer = json_circle(j["outer"]);
    for (const auto& h : j["holes"]) out.place.inner.push_back(json_circle(h));
    for (const auto& t : j["translations"]) out.translations.push_back(json_vec2(t));
    if (j.contains("mesh_h")) out.mesh_h = j["mesh_h"].get<double>();
    if (j.contains("collar_width")) out.collar_width = j["collar_width"].get<double>();
    return out;
}

ChessboardSpec parse_chessboard_spec(const Json& j) {
    PlaceSpec ps = parse_place_spec(j);
    ChessboardSpec cs;
    cs.place = ps.place;
    cs.translations = ps.translations;
    cs.mesh_h = ps.mesh_h;
    cs.collar_width = ps.collar_width;
    if (!j.contains("cap_heights")) throw SpecInvalid("chessboard spec needs cap_heights");
    for (const auto& h : j["cap_heights"]) cs.cap_heights.push_back(h.get<double>());
    if (j.contains("edge_samples")) cs.edge_samples = j["edge_samples"].get<int>();
    return cs;
}

FlipSpec parse_flip_spec(const Json& j) {
    FlipSpec fsp;
    if (j.contains("inner_radius")) fsp.inner_radius = j["inner_radius"].get<double>();
    if (j.contains("outer_radius")) fsp.outer_radius = j["outer_radius"].get<double>();
    if (j.contains("edge_samples")) fsp.edge_samples = j["edge_samples"].get<int>();
    if (j.contains("identity_branch")) fsp.identity_branch = j["identity_branch"].get<bool>();
    return fsp;
}

// ---------------------------------------------------------------- verify ---

struct Claim {
    std::string name;
    bool pass = false;
    double value = 0;   // measured residual / statistic
    double budget = 0;  // bound it was held against
    std::string note;
};

// 180-degree rotation of every patch rectangle: a reparametrization the grid
// represents exactly (nodes map to nodes, unit Jacobian), so the distance
// must be reproduced to roundoff rather than to interpolation error.
Reparametrization rot180_reparam(const std::vector<SrnfGridMeta>& metas) {
    return make_reparametrization(metas, [&](int patch, double u, double v) {
        const Rect& d = metas[std::size_t(patch)].domain;
        return Vec2(d.u0 + d.u1 - u, d.v0 + d.v1 - v);
    });
}

std::vector<Claim> run_verify_battery(std::uint64_t seed) {
    std::vector<Claim> out;
    auto push = [&](const std::string& name, bool pass, double value, double budget, std::string note = "") {
        out.push_back({name, pass, value, budget, std::move(note)});
        std::printf("  [%s] %-42s value %.3e  budget %.3e%s%s\n", pass ? "PASS" : "FAIL", name.c_str(), value,
                    budget, note.empty() ? "" : "  ", note.c_str());
    };

    // Invariance under seeded rigid motions and exact grid reparametrizations.
    {
        SurfaceImmersion sph = gen_sphere(33);
        SurfaceImmersion ell = gen_ellipsoid(1.0, 1.0, 1.2, 33);
        SrnfField q1 = srnf(sph), q2 = srnf(ell);
        double d = srnf_distance(q1, q2);
        Reparametrization phi = rot180_reparam(q1.meta);
        double worst = 0, worst_eq = 0;
        for (int trial = 0; trial < 20; ++trial) {
            Rng rng(seed + std::uint64_t(trial));
            RigidMotion m{rng.rotation(), rng.normal3()};
            SrnfField t1 = srnf(apply_motion(m, sph));
            SrnfField t2 = srnf(apply_motion(m, ell));
            worst_eq = std::max(worst_eq, samplewise_max_dev(t1, rotate_field(q1, m)));
            if (rng.next_u64() % 2 == 1) {
                t1 = reparam_act(t1, phi);
                t2 = reparam_act(t2, phi);
            }
            worst = std::max(worst, std::abs(srnf_distance(t1, t2) - d));
        }
        push("metric_invariance_seeded_motions", worst <= 1e-6 * d, worst, 1e-6 * d, "20 trials");
        push("srnf_rotation_equivariance", worst_eq <= 1e-6 * q1.norm(), worst_eq, 1e-6 * q1.norm());

        // Deliberate fault: an orientation-flipped fixture negates the field,
        // which the equivariance residual must flag.
        SurfaceImmersion flipped = ell;
        flipped.orientation = -flipped.orientation;
        double fault = samplewise_max_dev(srnf(flipped), q2);
        push("fault_flipped_orientation_detected", fault > 0.5, fault, 0.5, "expected failure is caught");
    }

    // Gauss-map area factor against |K| on the analytic battery (129 samples
    // per axis = 128^2 grid cells).
    {
        double worst = 0;
        // Cylinder: K = 0.
        auto fac = gauss_map_area_factor(gen_cylinder_pair(2.0, 129, 65).first);
        for (const auto& p : fac)
            for (double v : p) worst = std::max(worst, std::abs(v));
        // Seeded quadratic graphs against the closed-form curvature.
        Rng rng(seed ^ 0x9e3779b9ULL);
        for (int rep = 0; rep < 3; ++rep) {
            double a = rng.uniform(0.05, 0.2), b = rng.uniform(0.05, 0.2), c = rng.uniform(-0.05, 0.05);
            auto graph = gen_graph_patch({-0.5, 0.5, -0.5, 0.5}, 129, 129,
                                         [&](double x, double y) { return a * x * x + b * y * y + c * x * y; });
            fac = gauss_map_area_factor(graph);
            const auto& patch = graph.patches[0];
            for (int i = 0; i < patch.nu; ++i)
                for (int jj = 0; jj < patch.nv; ++jj) {
                    double x = patch.u_of(i), y = patch.v_of(jj);
                    double zx = 2 * a * x + c * y, zy = 2 * b * y + c * x;
                    double g = 1 + zx * zx + zy * zy;
                    double K = (4 * a * b - c * c) / (g * g);
                    worst = std::max(worst, std::abs(fac[0][patch.idx(i, jj)] - std::abs(K)));
                }
        }
        push("gauss_factor_matches_curvature", worst <= 1e-4, worst, 1e-4, "cylinder and 3 seeded graphs");

        // Sphere: one-sided stencils along patch borders differentiate the
        // discrete normal field twice with a single-sided footprint, which is
        // loose there; away from the two border rings the factor matches the
        // discrete |K| tightly, and the integral version is covered by the
        // Gauss-Bonnet claims below.
        auto sph = gen_sphere(129);
        auto sfac = gauss_map_area_factor(sph);
        auto cf = gaussian_curvature(sph);
        double worst_sphere = 0;
        for (std::size_t p = 0; p < sfac.size(); ++p)
            for (int i = 2; i < 127; ++i)
                for (int jj = 2; jj < 127; ++jj) {
                    std::size_t k = std::size_t(i) * 129 + jj;
                    worst_sphere = std::max(worst_sphere, std::abs(sfac[p][k] - std::abs(cf.K[p][k])));
                }
        push("gauss_factor_sphere_interior", worst_sphere <= 1e-4, worst_sphere, 1e-4,
             "vs discrete |K| away from patch borders");
    }

    // Gauss-Bonnet on the shipped closed genus-0 surfaces.
    {
        double worst = std::abs(gauss_bonnet_check(gen_sphere(513)) - 4 * kPi);
        push("gauss_bonnet_sphere", worst <= 1e-4, worst, 1e-4);

        ChessboardSpec cs;
        cs.place = {{Vec2(0, 0), 1.0}, {{Vec2(-0.4, 0), 0.2}}};
        cs.cap_heights = {-0.9, 0.2};
        cs.translations = {Vec2(0.3, 0)};
        ChessboardBuild cb = gen_chessboard_detailed(cs);
        double dev_chess = std::abs(gauss_bonnet_check(cb.id_surface) - 4 * kPi);

        FlipSpec fsp;
        auto flip_pair = gen_flip(fsp);
        double dev_flip = std::abs(gauss_bonnet_check(flip_pair.first) - 4 * kPi);
        push("gauss_bonnet_chessboard_and_flip", std::max(dev_chess, dev_flip) <= 1e-2,
             std::max(dev_chess, dev_flip), 1e-2);

        push("moser_certificate_chessboard",
             cb.moser.certificate.max_detj_dev <= 1e-4 && cb.moser.certificate.collar_dev <= 1e-6,
             std::max(cb.moser.certificate.max_detj_dev, cb.moser.certificate.collar_dev), 1e-4,
             "det J and collar pinning");
        push("flip_twist_area_preserving", flip_twist_det_dev(fsp) <= 1e-8, flip_twist_det_dev(fsp), 1e-8);
    }

    // Rigidity and convex-uniqueness probes.
    {
        RigidityReport ell = sphere_rigidity_probe(gen_ellipsoid(1, 1, 1.2, 49));
        push("rigidity_ellipsoid_detected", ell.exceeds_floor && ell.distance > 0.05, ell.distance, 0.05);

        RigidityReport tr = sphere_rigidity_probe(translate(gen_sphere(49), Vec3(0.3, -0.1, 0.7)));
        push("rigidity_translate_accepted", tr.is_translate && tr.translate_residual <= 1e-10,
             tr.translate_residual, 1e-10);

        // Quadrature noise: the probe's own distance on the unperturbed grid.
        double noise = sphere_rigidity_probe(gen_sphere(49)).distance;
        RigidityReport pr = sphere_rigidity_probe(gen_perturbed_sphere(49, seed + 7, 0.02));
        push("rigidity_perturbation_above_noise", pr.distance > 10 * std::max(noise, 1e-12), pr.distance,
             10 * std::max(noise, 1e-12), "seeded perturbation");

        std::vector<SupportBump> bumps = {{Vec3(1, 0.2, 0).normalized(), 0.15},
                                          {Vec3(-0.3, 1, 0.4).normalized(), 0.1}};
        SurfaceImmersion blob = gen_convex_blob(49, bumps);
        ConvexReport cv = convex_uniqueness_probe(blob, translate(blob, Vec3(0.1, 0.05, -0.2)), 1e-8);
        push("convex_translate_accepted", cv.within_tolerance && cv.translates_match && cv.translate_residual <= 1e-10,
             cv.translate_residual, 1e-10);

        ConvexReport cw = convex_uniqueness_probe(gen_sphere(49), gen_ellipsoid(1, 1, 1.2, 49), 1e-8);
        push("convex_distance_witness", !cw.within_tolerance && cw.k_witness > 0, cw.k_witness, 0.0,
             "nonzero curvature witness");
    }

    return out;
}

// ------------------------------------------------------------------ main ---

int classify_exit(const Error& e) {
    if (dynamic_cast<const SpecInvalid*>(&e) || dynamic_cast<const InvalidParam*>(&e) ||
        dynamic_cast<const GridMismatch*>(&e) || dynamic_cast<const OutOfDomain*>(&e) ||
        dynamic_cast<const NotARotation*>(&e) || dynamic_cast<const InsufficientSamples*>(&e) ||
        dynamic_cast<const Overlap*>(&e) || dynamic_cast<const ProfileInvalid*>(&e) ||
        dynamic_cast<const NotClosed*>(&e) || dynamic_cast<const NotConvex*>(&e) ||
        dynamic_cast<const IncompatibleData*>(&e))
        return 3;
    return 4; // degenerate data, mesh, solver, routing, flow failures
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"srnf_lab: square-root normal fields, their degeneracies, and the Moser flow"};
    app.require_subcommand(1);
    app.footer("Environment: SRNF_LAB_THREADS caps worker threads.");

    int exit_code = 0;

    // --- gen ------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "generate example surfaces (container JSON + OBJ + manifest)");
    gen->require_subcommand(1);

    {
        auto* c = gen->add_subcommand("cylinder", "unit cylinder and its L-image (equal SRNFs)");
        auto r = std::make_shared<double>(2.0);
        auto n = std::make_shared<int>(129);
        auto outd = std::make_shared<std::string>("out_cylinder");
        c->add_option("--r", *r, "squeeze factor of L(x,y,z) = (rx, ry, z/r)");
        c->add_option("--n", *n, "samples per grid axis");
        c->add_option("--out", *outd, "output directory");
        c->callback([=] {
            RunManifest man("gen cylinder", *outd);
            man.param("r", *r);
            man.param("n", *n);
            auto [id, img] = gen_cylinder_pair(*r, *n, *n);
            for (const auto& f : emit_surface(*outd, "id_surface", id)) man.output(f);
            for (const auto& f : emit_surface(*outd, "image_surface", img)) man.output(f);
            Json rep = distance_report(id, img, false);
            save_json(*outd + "/report.json", rep);
            man.output(*outd + "/report.json");
            man.write();
            std::printf("gen cylinder: distance %.3e (relative %.3e) -> %s\n", rep["distance"].get<double>(),
                        rep["relative_distance"].get<double>(), outd->c_str());
        });
    }
    {
        auto* c = gen->add_subcommand("paraboloid", "graph paraboloid (x/a, y/b, x^2/a + y^2/b)");
        auto a = std::make_shared<double>(1.0);
        auto b = std::make_shared<double>(4.0);
        auto n = std::make_shared<int>(65);
        auto outd = std::make_shared<std::string>("out_paraboloid");
        c->add_option("--a", *a, "first coefficient");
        c->add_option("--b", *b, "second coefficient");
        c->add_option("--n", *n, "samples per axis");
        c->add_option("--out", *outd, "output directory");
        c->callback([=] {
            RunManifest man("gen paraboloid", *outd);
            man.param("a", *a);
            man.param("b", *b);
            man.param("n", *n);
            SurfaceImmersion f = gen_paraboloid(*a, *b, {-1, 1, -1, 1}, *n, *n);
            for (const auto& file : emit_surface(*outd, "surface", f)) man.output(file);
            man.write();
            std::printf("gen paraboloid: %zu patches -> %s\n", f.patches.size(), outd->c_str());
        });
    }
    {
        auto* c = gen->add_subcommand("chessboard", "closed chessboard surface and its rearranged twin");
        auto specp = std::make_shared<std::string>();
        auto outd = std::make_shared<std::string>("out_chessboard");
        c->add_option("--spec", *specp, "JSON spec file")->required();
        c->add_option("--out", *outd, "output directory");
        c->callback([=] {
            RunManifest man("gen chessboard", *outd);
            man.input(*specp);
            ChessboardSpec cs = parse_chessboard_spec(load_json(*specp));
            ChessboardBuild cb = gen_chessboard_detailed(cs);
            for (const auto& f : emit_surface(*outd, "id_surface", cb.id_surface)) man.output(f);
            for (const auto& f : emit_surface(*outd, "moved_surface", cb.moved_surface)) man.output(f);
            Json rep = distance_report(cb.id_surface, cb.moved_surface, false);
            rep["moser_certificate"] = {{"max_detj_dev", cb.moser.certificate.max_detj_dev},
                                        {"collar_dev", cb.moser.certificate.collar_dev},
                                        {"density_defect", cb.moser.certificate.density_defect},
                                        {"weak_residual", cb.moser.certificate.weak_res}};
            save_json(*outd + "/report.json", rep);
            man.output(*outd + "/report.json");
            man.write();
            std::printf("gen chessboard: distance %.3e (relative %.3e), det J dev %.3e -> %s\n",
                        rep["distance"].get<double>(), rep["relative_distance"].get<double>(),
                        cb.moser.certificate.max_detj_dev, outd->c_str());
        });
    }
    {
        auto* c = gen->add_subcommand("flip", "closed flip surface and its inverted-cap twin");
        auto specp = std::make_shared<std::string>();
        auto outd = std::make_shared<std::string>("out_flip");
        c->add_option("--spec", *specp, "JSON spec file (optional fields)");
        c->add_option("--out", *outd, "output directory");
        c->callback([=] {
            RunManifest man("gen flip", *outd);
            FlipSpec fsp;
            if (!specp->empty()) {
                man.input(*specp);
                fsp = parse_flip_spec(load_json(*specp));
            }
            auto [id, moved] = gen_flip(fsp);
            for (const auto& f : emit_surface(*outd, "id_surface", id)) man.output(f);
            for (const auto& f : emit_surface(*outd, "moved_surface", moved)) man.output(f);
            Json rep = distance_report(id, moved, false);
            rep["twist_det_dev"] = flip_twist_det_dev(fsp);
            save_json(*outd + "/report.json", rep);
            man.output(*outd + "/report.json");
            man.write();
            std::printf("gen flip: distance %.3e (relative %.3e), twist det dev %.3e -> %s\n",
                        rep["distance"].get<double>(), rep["relative_distance"].get<double>(),
                        rep["twist_det_dev"].get<double>(), outd->c_str());
        });
    }
    {
        auto* c = gen->add_subcommand("sphere", "unit sphere on six gnomonic patches");
        auto n = std::make_shared<int>(65);
        auto outd = std::make_shared<std::string>("out_sphere");
        c->add_option("--n", *n, "samples per patch axis");
        c->add_option("--out", *outd, "output directory");
        c->callback([=] {
            RunManifest man("gen sphere", *outd);
            man.param("n", *n);
            for (const auto& f : emit_surface(*outd, "surface", gen_sphere(*n))) man.output(f);
            man.write();
            std::printf("gen sphere -> %s\n", outd->c_str());
        });
    }
    {
        auto* c = gen->add_subcommand("ellipsoid", "linear image diag(a,b,c) of the unit sphere");
        auto a = std::make_shared<double>(1.0);
        auto b = std::make_shared<double>(1.0);
        auto cc = std::make_shared<double>(1.2);
        auto n = std::make_shared<int>(65);
        auto outd = std::make_shared<std::string>("out_ellipsoid");
        c->add_option("--a", *a);
        c->add_option("--b", *b);
        c->add_option("--c", *cc);
        c->add_option("--n", *n, "samples per patch axis");
        c->add_option("--out", *outd, "output directory");
        c->callback([=] {
            RunManifest man("gen ellipsoid", *outd);
            man.param("a", *a);
            man.param("b", *b);
            man.param("c", *cc);
            man.param("n", *n);
            for (const auto& f : emit_surface(*outd, "surface", gen_ellipsoid(*a, *b, *cc, *n))) man.output(f);
            man.write();
            std::printf("gen ellipsoid -> %s\n", outd->c_str());
        });
    }

    // --- srnf -----------------------------------------------------------
    {
        auto* c = app.add_subcommand("srnf", "compute the square-root normal field of a stored surface");
        auto inp = std::make_shared<std::string>();
        auto outd = std::make_shared<std::string>("out_srnf");
        c->add_option("surface", *inp, "surface container JSON")->required();
        c->add_option("--out", *outd, "output directory");
        c->callback([=] {
            RunManifest man("srnf", *outd);
            man.input(*inp);
            SurfaceImmersion f = load_surface(*inp);
            SrnfField q = srnf(f);
            std::string manifest = *outd + "/field.json";
            save_field(manifest, q);
            man.output(manifest);
            for (std::size_t p = 0; p < q.patch_count(); ++p) {
                man.output(*outd + "/field.p" + std::to_string(p) + ".val.f64");
                man.output(*outd + "/field.p" + std::to_string(p) + ".rw.f64");
            }
            man.write();
            std::printf("srnf: field norm %.6e -> %s\n", q.norm(), outd->c_str());
        });
    }

    // --- dist -----------------------------------------------------------
    {
        auto* c = app.add_subcommand("dist", "SRNF distance and rigid-alignment report for two surfaces");
        auto in1 = std::make_shared<std::string>();
        auto in2 = std::make_shared<std::string>();
        auto outd = std::make_shared<std::string>("out_dist");
        auto certify = std::make_shared<bool>(true);
        c->add_option("surface1", *in1)->required();
        c->add_option("surface2", *in2)->required();
        c->add_option("--out", *outd, "output directory");
        c->add_flag("--certify,!--no-certify", *certify, "run the rigid-alignment certifier (default on)");
        c->callback([=] {
            RunManifest man("dist", *outd);
            man.input(*in1);
            man.input(*in2);
            man.param("certify", *certify);
            SurfaceImmersion f1 = load_surface(*in1), f2 = load_surface(*in2);
            Json rep = distance_report(f1, f2, *certify);
            save_json(*outd + "/report.json", rep);
            man.output(*outd + "/report.json");
            man.write();
            std::printf("dist: %.6e (relative %.3e), samplewise max %.3e%s\n", rep["distance"].get<double>(),
                        rep["relative_distance"].get<double>(), rep["samplewise_max_dev"].get<double>(),
                        *certify ? (rep["alignment"]["congruent"].get<bool>() ? ", congruent" : ", non-congruent")
                                 : "");
        });
    }

    // --- moser ----------------------------------------------------------
    {
        auto* c = app.add_subcommand("moser", "area-preserving rearrangement map with certificate");
        auto specp = std::make_shared<std::string>();
        auto outd = std::make_shared<std::string>("out_moser");
        c->add_option("--spec", *specp, "flat place JSON (outer, holes, translations)")->required();
        c->add_option("--out", *outd, "output directory");
        c->callback([=] {
            RunManifest man("moser", *outd);
            man.input(*specp);
            PlaceSpec ps = parse_place_spec(load_json(*specp));
            HoledDiscDomain dom = make_domain(ps.place, ps.mesh_h, ps.collar_width);
            RearrangementResult rr = nested_rearrangement_diffeo(dom, ps.translations);
            MoserRun run = flat_place_diffeo(dom, ps.translations, rr);

            std::vector<double> nodes, mapped, dets;
            for (const Vec2& p : dom.mesh.nodes) {
                nodes.push_back(p.x());
                nodes.push_back(p.y());
            }
            for (const Vec2& p : run.nodes.node_images) {
                mapped.push_back(p.x());
                mapped.push_back(p.y());
            }
            std::vector<double> node_det = run.nodes.node_det(dom.mesh);
            dets.assign(node_det.begin(), node_det.end());
            write_f64(*outd + "/nodes.f64", nodes);
            write_f64(*outd + "/mapped.f64", mapped);
            write_f64(*outd + "/node_det.f64", dets);

            Json cert;
            cert["max_detj_dev"] = run.certificate.max_detj_dev;
            cert["collar_dev"] = run.certificate.collar_dev;
            cert["density_defect"] = run.certificate.density_defect;
            cert["weak_residual"] = run.certificate.weak_res;
            cert["stages"] = run.certificate.stages;
            save_json(*outd + "/certificate.json", cert);
            for (const char* f : {"/nodes.f64", "/mapped.f64", "/node_det.f64", "/certificate.json"})
                man.output(*outd + f);
            man.write();
            std::printf("moser: det J dev %.3e, collar dev %.3e, %zu nodes -> %s\n",
                        run.certificate.max_detj_dev, run.certificate.collar_dev, dom.mesh.nodes.size(),
                        outd->c_str());
        });
    }

    // --- verify ---------------------------------------------------------
    {
        auto* c = app.add_subcommand("verify", "run the probe batteries; JSON scorecard; nonzero exit on failure");
        auto outd = std::make_shared<std::string>("out_verify");
        auto seed = std::make_shared<std::uint64_t>(20240801ULL);
        c->add_option("--out", *outd, "output directory");
        c->add_option("--seed", *seed, "seed for the randomized probes");
        c->callback([=, &exit_code] {
            RunManifest man("verify", *outd);
            man.seed(*seed);
            std::printf("verify battery (seed %llu):\n", static_cast<unsigned long long>(*seed));
            std::vector<Claim> claims = run_verify_battery(*seed);
            bool all = true;
            Json rows = Json::array();
            for (const Claim& cl : claims) {
                all = all && cl.pass;
                rows.push_back({{"claim", cl.name},
                                {"pass", cl.pass},
                                {"value", cl.value},
                                {"budget", cl.budget},
                                {"note", cl.note}});
            }
            Json score;
            score["seed"] = *seed;
            score["all_pass"] = all;
            score["claims"] = rows;
            save_json(*outd + "/scorecard.json", score);
            man.output(*outd + "/scorecard.json");
            man.write();
            std::printf("verify: %s (%zu claims) -> %s\n", all ? "ALL PASS" : "FAILURES", claims.size(),
                        outd->c_str());
            if (!all) exit_code = 2;
        });
    }

    // --- report ---------------------------------------------------------
    auto* rpt = app.add_subcommand("report", "plot-ready CSV data");
    rpt->require_subcommand(1);
    {
        auto* c = rpt->add_subcommand("resolution", "SRNF distance of a shipped pair versus grid resolution");
        auto family = std::make_shared<std::string>("cylinder");
        auto outd = std::make_shared<std::string>("out_report");
        c->add_option("--family", *family, "cylinder | paraboloid | flip")
            ->check(CLI::IsMember({"cylinder", "paraboloid", "flip"}));
        c->add_option("--out", *outd, "output directory");
        c->callback([=] {
            RunManifest man("report resolution", *outd);
            man.param("family", *family);
            std::vector<std::vector<double>> rows;
            for (int n : {17, 33, 65, 129}) {
                SrnfField qa, qb;
                if (*family == "cylinder") {
                    auto [a, b] = gen_cylinder_pair(2.0, n, n);
                    qa = srnf(a);
                    qb = srnf(b);
                } else if (*family == "paraboloid") {
                    qa = srnf(gen_paraboloid(1, 4, {-1, 1, -1, 1}, n, n));
                    qb = srnf(gen_paraboloid(2, 2, {-1, 1, -1, 1}, n, n));
                } else {
                    FlipSpec fsp;
                    fsp.edge_samples = n;
                    auto [a, b] = gen_flip(fsp);
                    qa = srnf(a);
                    qb = srnf(b);
                }
                double d = srnf_distance(qa, qb);
                rows.push_back({double(n), d, qa.norm(), d / qa.norm(), samplewise_max_dev(qa, qb)});
            }
            save_csv(*outd + "/resolution.csv", {"n", "distance", "field_norm", "relative", "samplewise_max"},
                     rows);
            man.output(*outd + "/resolution.csv");
            man.write();
            std::printf("report resolution (%s) -> %s/resolution.csv\n", family->c_str(), outd->c_str());
        });
    }
    {
        auto* c = rpt->add_subcommand("detj", "histogram of the Moser map's Jacobian determinant at mesh nodes");
        auto specp = std::make_shared<std::string>();
        auto outd = std::make_shared<std::string>("out_report");
        auto bins = std::make_shared<int>(41);
        c->add_option("--spec", *specp, "flat place JSON (outer, holes, translations)")->required();
        c->add_option("--bins", *bins, "histogram bin count");
        c->add_option("--out", *outd, "output directory");
        c->callback([=] {
            RunManifest man("report detj", *outd);
            man.input(*specp);
            man.param("bins", *bins);
            PlaceSpec ps = parse_place_spec(load_json(*specp));
            HoledDiscDomain dom = make_domain(ps.place, ps.mesh_h, ps.collar_width);
            RearrangementResult rr = nested_rearrangement_diffeo(dom, ps.translations);
            MoserRun run = flat_place_diffeo(dom, ps.translations, rr);

            std::vector<double> dets = run.nodes.node_det(dom.mesh);
            double lo = dets[0], hi = dets[0];
            for (double d : dets) {
                lo = std::min(lo, d);
                hi = std::max(hi, d);
            }
            double pad = 1e-12 + 0.01 * (hi - lo);
            lo -= pad;
            hi += pad;
            std::vector<double> counts(std::size_t(*bins), 0.0);
            for (double d : dets)
                counts[std::min(std::size_t(*bins) - 1, std::size_t((d - lo) / (hi - lo) * *bins))] += 1;
            std::vector<std::vector<double>> rows;
            for (int i = 0; i < *bins; ++i) {
                double w = (hi - lo) / *bins;
                rows.push_back({lo + i * w, lo + (i + 1) * w, counts[std::size_t(i)]});
            }
            save_csv(*outd + "/detj_hist.csv", {"det_lo", "det_hi", "count"}, rows);
            man.output(*outd + "/detj_hist.csv");
            man.write();
            std::printf("report detj: det J in [%.6f, %.6f] over %zu nodes -> %s/detj_hist.csv\n", lo, hi,
                        dets.size(), outd->c_str());
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 3; // malformed command line is an input error
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return classify_exit(e);
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "failure: %s\n", e.what());
        return 4;
    }
    return exit_code;
}
