#include "srnf/io.hpp"
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace srnflab {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "binary payloads assume a little-endian host");
static_assert(sizeof(double) == 8);

void atomic_write(const std::string& path, const std::string& bytes) {
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open for writing: " + tmp.string());
        out.write(bytes.data(), std::streamsize(bytes.size()));
        if (!out) throw Error("short write: " + tmp.string());
    }
    fs::rename(tmp, target);
}

void write_f64(const std::string& path, const std::vector<double>& data) {
    std::string bytes(data.size() * 8, '\0');
    std::memcpy(bytes.data(), data.data(), bytes.size());
    atomic_write(path, bytes);
}

std::vector<double> read_f64(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw Error("cannot open: " + path);
    auto n = std::size_t(in.tellg());
    if (n % 8 != 0) throw SpecInvalid("binary payload size is not a multiple of 8: " + path);
    std::vector<double> data(n / 8);
    in.seekg(0);
    in.read(reinterpret_cast<char*>(data.data()), std::streamsize(n));
    if (!in) throw Error("short read: " + path);
    return data;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json load_json(const std::string& path) {
    try {
        return Json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw SpecInvalid("malformed JSON in " + path + ": " + e.what());
    }
}

void save_json(const std::string& path, const Json& j) { atomic_write(path, j.dump(2) + "\n"); }

namespace {

std::string sibling(const std::string& manifest_path, const std::string& name) {
    fs::path p(manifest_path);
    return (p.has_parent_path() ? p.parent_path() / name : fs::path(name)).string();
}

std::string payload_stem(const std::string& manifest_path) {
    return fs::path(manifest_path).stem().string();
}

} // namespace

void save_surface(const std::string& manifest_path, const SurfaceImmersion& surf) {
    surf.validate();
    std::string stem = payload_stem(manifest_path);
    Json m;
    m["format"] = "srnf-surface";
    m["version"] = 1;
    m["orientation"] = surf.orientation;
    m["patches"] = Json::array();
    for (std::size_t pi = 0; pi < surf.patches.size(); ++pi) {
        const auto& p = surf.patches[pi];
        std::string pos_name = stem + ".p" + std::to_string(pi) + ".pos.f64";
        std::string w_name = stem + ".p" + std::to_string(pi) + ".rw.f64";
        std::vector<double> pos(p.size() * 3);
        std::vector<double> rw(p.size());
        for (std::size_t k = 0; k < p.size(); ++k) {
            pos[3 * k] = p.pos[k].x();
            pos[3 * k + 1] = p.pos[k].y();
            pos[3 * k + 2] = p.pos[k].z();
            rw[k] = p.weight[k] * p.density[k];
        }
        write_f64(sibling(manifest_path, pos_name), pos);
        write_f64(sibling(manifest_path, w_name), rw);
        Json jp;
        jp["domain"] = {p.domain.u0, p.domain.u1, p.domain.v0, p.domain.v1};
        jp["nu"] = p.nu;
        jp["nv"] = p.nv;
        jp["periodic_u"] = p.periodic_u;
        jp["periodic_v"] = p.periodic_v;
        jp["positions_file"] = pos_name;
        jp["weights_file"] = w_name;
        m["patches"].push_back(jp);
    }
    m["seams"] = Json::array();
    for (const auto& s : surf.seams) {
        Json js;
        js["patch_a"] = s.patch_a;
        js["edge_a"] = edge_name(s.edge_a);
        js["patch_b"] = s.patch_b;
        js["edge_b"] = edge_name(s.edge_b);
        js["reversed"] = s.reversed;
        m["seams"].push_back(js);
    }
    save_json(manifest_path, m);
}

SurfaceImmersion load_surface(const std::string& manifest_path) {
    Json m = load_json(manifest_path);
    if (m.value("format", "") != "srnf-surface") throw SpecInvalid("not a surface manifest: " + manifest_path);
    SurfaceImmersion surf;
    surf.orientation = m.value("orientation", 1);
    if (!m.contains("patches") || !m["patches"].is_array() || m["patches"].empty())
        throw SpecInvalid("surface manifest has no patches: " + manifest_path);
    for (const auto& jp : m["patches"]) {
        auto dom = jp.at("domain");
        if (!dom.is_array() || dom.size() != 4) throw SpecInvalid("patch domain must be [u0,u1,v0,v1]");
        Rect r{dom[0].get<double>(), dom[1].get<double>(), dom[2].get<double>(), dom[3].get<double>()};
        int nu = jp.at("nu").get<int>();
        int nv = jp.at("nv").get<int>();
        ParamPatch p(r, nu, nv);
        p.periodic_u = jp.value("periodic_u", false);
        p.periodic_v = jp.value("periodic_v", false);
        auto pos = read_f64(sibling(manifest_path, jp.at("positions_file").get<std::string>()));
        auto rw = read_f64(sibling(manifest_path, jp.at("weights_file").get<std::string>()));
        if (pos.size() != p.size() * 3 || rw.size() != p.size())
            throw SpecInvalid("payload size does not match nu*nv for a patch in " + manifest_path);
        for (std::size_t k = 0; k < p.size(); ++k) {
            p.pos[k] = Vec3(pos[3 * k], pos[3 * k + 1], pos[3 * k + 2]);
            if (!(rw[k] > 0)) throw SpecInvalid("non-positive Riemannian weight in " + manifest_path);
            p.density[k] = rw[k] / p.weight[k];
        }
        surf.patches.push_back(std::move(p));
    }
    for (const auto& js : m.value("seams", Json::array())) {
        Seam s;
        s.patch_a = js.at("patch_a").get<int>();
        s.edge_a = edge_from_name(js.at("edge_a").get<std::string>());
        s.patch_b = js.at("patch_b").get<int>();
        s.edge_b = edge_from_name(js.at("edge_b").get<std::string>());
        s.reversed = js.value("reversed", false);
        if (s.patch_a < 0 || s.patch_a >= int(surf.patches.size()) || s.patch_b < 0 ||
            s.patch_b >= int(surf.patches.size()))
            throw SpecInvalid("seam references a patch that does not exist");
        surf.seams.push_back(s);
    }
    surf.validate();
    return surf;
}

void save_field(const std::string& manifest_path, const SrnfField& q) {
    std::string stem = payload_stem(manifest_path);
    Json m;
    m["format"] = "srnf-field";
    m["version"] = 1;
    m["patches"] = Json::array();
    for (std::size_t pi = 0; pi < q.values.size(); ++pi) {
        const auto& meta = q.meta[pi];
        std::string val_name = stem + ".p" + std::to_string(pi) + ".val.f64";
        std::string w_name = stem + ".p" + std::to_string(pi) + ".rw.f64";
        std::vector<double> vals(q.values[pi].size() * 3);
        for (std::size_t k = 0; k < q.values[pi].size(); ++k) {
            vals[3 * k] = q.values[pi][k].x();
            vals[3 * k + 1] = q.values[pi][k].y();
            vals[3 * k + 2] = q.values[pi][k].z();
        }
        write_f64(sibling(manifest_path, val_name), vals);
        write_f64(sibling(manifest_path, w_name), q.rw[pi]);
        Json jp;
        jp["domain"] = {meta.domain.u0, meta.domain.u1, meta.domain.v0, meta.domain.v1};
        jp["nu"] = meta.nu;
        jp["nv"] = meta.nv;
        jp["periodic_u"] = meta.periodic_u;
        jp["periodic_v"] = meta.periodic_v;
        jp["values_file"] = val_name;
        jp["weights_file"] = w_name;
        m["patches"].push_back(jp);
    }
    save_json(manifest_path, m);
}

SrnfField load_field(const std::string& manifest_path) {
    Json m = load_json(manifest_path);
    if (m.value("format", "") != "srnf-field") throw SpecInvalid("not a field manifest: " + manifest_path);
    SrnfField q;
    for (const auto& jp : m.at("patches")) {
        auto dom = jp.at("domain");
        SrnfGridMeta meta{{dom[0].get<double>(), dom[1].get<double>(), dom[2].get<double>(), dom[3].get<double>()},
                          jp.at("nu").get<int>(), jp.at("nv").get<int>(),
                          jp.value("periodic_u", false), jp.value("periodic_v", false)};
        auto vals = read_f64(sibling(manifest_path, jp.at("values_file").get<std::string>()));
        auto rw = read_f64(sibling(manifest_path, jp.at("weights_file").get<std::string>()));
        std::size_t n = std::size_t(meta.nu) * std::size_t(meta.nv);
        if (vals.size() != n * 3 || rw.size() != n)
            throw SpecInvalid("field payload size mismatch in " + manifest_path);
        std::vector<Vec3> v(n);
        for (std::size_t k = 0; k < n; ++k) v[k] = Vec3(vals[3 * k], vals[3 * k + 1], vals[3 * k + 2]);
        q.meta.push_back(meta);
        q.values.push_back(std::move(v));
        q.rw.push_back(std::move(rw));
    }
    return q;
}

void save_obj(const std::string& path, const SurfaceImmersion& surf) {
    std::ostringstream out;
    out.precision(12);
    std::size_t base = 1;
    for (const auto& p : surf.patches) {
        for (const auto& x : p.pos) out << "v " << x.x() << ' ' << x.y() << ' ' << x.z() << '\n';
        for (int i = 0; i + 1 < p.nu; ++i)
            for (int j = 0; j + 1 < p.nv; ++j) {
                std::size_t a = base + p.idx(i, j), b = base + p.idx(i + 1, j);
                std::size_t c = base + p.idx(i + 1, j + 1), d = base + p.idx(i, j + 1);
                out << "f " << a << ' ' << b << ' ' << c << ' ' << d << '\n';
            }
        base += p.size();
    }
    atomic_write(path, out.str());
}

void save_csv(const std::string& path, const std::vector<std::string>& header,
              const std::vector<std::vector<double>>& rows) {
    std::ostringstream out;
    out.precision(17);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << '\n';
    }
    atomic_write(path, out.str());
}

} // namespace srnflab
