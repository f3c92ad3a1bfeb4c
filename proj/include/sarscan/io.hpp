#pragma once

// File formats: datasets (CSV, GeoJSON points), weights edge lists and the
// cluster report serializations.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sarscan/scan.hpp"
#include "sarscan/spatial.hpp"
#include "sarscan/weights.hpp"

namespace sarscan::io {

// Header `id,x,y,value`. With allow_missing_values, a layout-only file
// (`id,x,y`) is accepted and values are set to 0. Errors name the line.
SpatialDataset read_dataset_csv(const std::filesystem::path& path, bool allow_missing_values = false);
SpatialDataset parse_dataset_csv(const std::string& text, bool allow_missing_values = false,
                                 const std::string& source = "<memory>");

// FeatureCollection of Point features. The outcome is read from
// properties[value_property]; the id from properties[id_property] when
// present, else the feature "id", else the feature's position.
SpatialDataset read_dataset_geojson(const std::filesystem::path& path, const std::string& value_property,
                                    const std::string& id_property = "id");
SpatialDataset parse_dataset_geojson(const std::string& text, const std::string& value_property,
                                     const std::string& id_property = "id");

// Dispatches on extension (.geojson / .json -> GeoJSON, otherwise CSV).
SpatialDataset read_dataset(const std::filesystem::path& path, const std::string& value_property = "value");

// Weights edge list. The header selects the indexing:
//   i,j,w        0-based site indices
//   id_i,id_j,w  site ids resolved against `layout`
// The weight column is optional (defaults to 1).
WeightsMatrix parse_weights_csv(const std::string& text, const SpatialDataset& layout,
                                const std::string& source = "<memory>");
WeightsMatrix read_weights_csv(const std::filesystem::path& path, const SpatialDataset& layout);

// Undirected contiguity pairs (`id_i,id_j` or `i,j`); returns a binary
// symmetric matrix.
WeightsMatrix parse_contiguity_csv(const std::string& text, const SpatialDataset& layout,
                                   const std::string& source = "<memory>");
WeightsMatrix read_contiguity_csv(const std::filesystem::path& path, const SpatialDataset& layout);

// Edge list with ids: id_i,id_j,w (rows in storage order).
std::string weights_csv(const WeightsMatrix& w, const SpatialDataset& layout);

// Table-1-style CSV:
// cluster,n_sites,mean_inside,sd_inside,mean_outside,sd_outside,p_value,statistic,center,radius
std::string clusters_csv(std::span<const ClusterReport> reports, const SpatialDataset& ds);
std::string clusters_json(std::span<const ClusterReport> reports, const SpatialDataset& ds);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// Shortest decimal form that round-trips.
std::string format_double(double v);

}  // namespace sarscan::io
