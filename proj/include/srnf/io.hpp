#pragma once
#include "srnf/surface.hpp"
#include <nlohmann/json.hpp>
#include <string>

namespace srnflab {

using Json = nlohmann::ordered_json;

// --- binary helpers: little-endian float64 payloads, row-major with v fastest ---
void write_f64(const std::string& path, const std::vector<double>& data);
std::vector<double> read_f64(const std::string& path);

// Writes bytes to `path` atomically: temp file in the same directory, then rename.
void atomic_write(const std::string& path, const std::string& bytes);

std::string read_text(const std::string& path);

// --- surface container ---
//
// A surface is a JSON manifest plus two binary payloads per patch:
//   positions_file  3 doubles per sample (x,y,z)
//   weights_file    1 double per sample: the Riemannian quadrature weight
//                   (flat tensor weight times the reference area density)
// The manifest records domain rectangle, sample counts, periodic flags,
// orientation and the seam list.  On load the flat tensor weights are
// regenerated from (domain, nu, nv) and the density is recovered as the
// stored weight divided by the flat weight.
void save_surface(const std::string& manifest_path, const SurfaceImmersion& surf);
SurfaceImmersion load_surface(const std::string& manifest_path);

// --- field container (same layout; values_file has 3 doubles per sample) ---
void save_field(const std::string& manifest_path, const SrnfField& q);
SrnfField load_field(const std::string& manifest_path);

// Wavefront OBJ export for eyeballing results; per-patch quad grids, seams unmerged.
void save_obj(const std::string& path, const SurfaceImmersion& surf);

// CSV with a header row; each row is one record.
void save_csv(const std::string& path, const std::vector<std::string>& header,
              const std::vector<std::vector<double>>& rows);

Json load_json(const std::string& path);
void save_json(const std::string& path, const Json& j);

} // namespace srnflab
