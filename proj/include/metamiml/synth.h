// Planted-community synthetic HMIN generator with a nearest-centroid oracle.

#ifndef METAMIML_SYNTH_H_
#define METAMIML_SYNTH_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "metamiml/hmin.h"

namespace metamiml {

struct AuxTypeSpec {
  std::string name;
  std::size_t count = 0;
};

struct SynthConfig {
  std::size_t num_bags = 60;
  std::vector<AuxTypeSpec> aux = {{"D", 40}, {"M", 40}};
  std::size_t q = 12;           // labels
  std::size_t c = 3;            // communities
  std::size_t d = 16;           // instance dimension, >= q
  std::size_t min_instances = 6;
  std::size_t max_instances = 12;
  double sigma_f = 0.5;         // feature noise
  double epsilon = 0.05;        // cross-community edge probability
  double label_flip = 0.02;
  double centroid_scale = 1.0;  // centroid of label j is scale * e_j
  std::size_t bag_degree = 4;   // edges from each bag to each aux type
  std::size_t aux_degree = 2;   // edges between consecutive aux types
  std::uint64_t seed = 0;

  void Check() const;
};

struct SynthManifest {
  std::uint64_t seed = 0;
  std::vector<std::size_t> label_community;  // by label index
  // Parallel arrays over bags in ascending external id.
  std::vector<std::uint64_t> bag_ids;
  std::vector<std::size_t> bag_community;
  std::vector<std::vector<LabelIndex>> instance_labels;  // centroid per row
  std::vector<std::uint64_t> aux_ids;
  std::vector<std::size_t> aux_community;
  double centroid_scale = 1.0;
  double oracle_macro_f1 = 0.0;
};

struct SynthResult {
  Hmin graph;
  SynthManifest manifest;
};

SynthResult GenerateSynthetic(const SynthConfig& cfg);

// Nearest one-hot centroid of a feature row (lowest index on ties).
LabelIndex NearestCentroid(const Eigen::Ref<const Vector>& row, std::size_t q,
                           double scale);

// Fraction of instances whose nearest centroid is their generating label.
double NearestCentroidInstanceAccuracy(const Hmin& g, const SynthManifest& m);

// Community vote over instances' nearest centroids; the bag is predicted to
// carry every label of the winning community. Returns macro F1 against the
// bag labels in `g`.
double NearestCentroidOracleF1(const Hmin& g, const SynthManifest& m);

// Within- and cross-community edge densities (edges / possible pairs).
struct CommunityDensity {
  double within = 0.0;
  double cross = 0.0;
  std::size_t cross_edges = 0;
};
CommunityDensity MeasureDensity(const Hmin& g, const SynthManifest& m);

// Manifest text: `SYNTH v1 seed=..`, `ORACLE macro_f1=..`, `SCALE ..`,
// `LC` (label communities), then `B`, `A` and `I` records.
std::string SerializeManifest(const SynthManifest& m);
void SaveManifest(const SynthManifest& m, const std::filesystem::path& path);
SynthManifest ParseManifest(const std::string& text);
SynthManifest LoadManifest(const std::filesystem::path& path);

}  // namespace metamiml

#endif  // METAMIML_SYNTH_H_
