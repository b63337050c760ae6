// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lmid/heatmap.hpp"

namespace lmid {

enum class Split { train, gallery, query };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct Sample {
    std::string image_path;  // relative to the dataset root
    int identity_label = 0;  // dense, train-set contiguous
    LandmarkSet landmarks;
    Split split = Split::train;
};

struct Provenance {
    std::string config_digest;
    std::uint64_t seed = 0;
};

struct DatasetManifest {
    std::string root;
    int k = 0;
    std::vector<std::string> landmark_names;
    std::vector<Sample> samples;
    // dense label -> external identity id
    std::vector<std::string> identity_index;
    Provenance provenance;

    std::vector<int> indices_of(Split s) const;
    std::vector<int> identity_set(Split s) const;  // sorted unique labels
    void validate() const;  // split-hygiene and label-range checks
};

// Writes manifest.json and landmarks.csv under manifest.root.
void save_manifest(const DatasetManifest& manifest);

// Parses manifest.json + landmarks.csv written by save_manifest (the synthgen
// output format). Collects every malformed row / missing image and throws one
// error listing all of them.
DatasetManifest load_annotations(const std::string& root);

// Real-data evaluation protocol: gallery = all former train images plus
// per_id_gallery random images of each test identity; query = the remaining
// test images. Input test images are the manifest's gallery/query samples;
// train samples are relabeled gallery in the output.
DatasetManifest build_real_splits(const DatasetManifest& manifest, int per_id_gallery, Rng& rng);

// Hides one randomly chosen visible landmark in a `frac` fraction of samples.
// Used to mimic a real-data visibility mix on synthetic data.
DatasetManifest hide_random_landmarks(const DatasetManifest& manifest, double frac, Rng& rng);

// Writes the manifest under a new root, hard-linking (or copying) the images
// so the result is a self-contained dataset directory.
DatasetManifest materialize_manifest(const DatasetManifest& manifest, const std::string& new_root);

// P identities x K instances per batch; instances are drawn without
// replacement when an identity has >= K images and with replacement
// otherwise. Every identity appears in at least one batch per epoch.
class PkBatchSampler {
  public:
    PkBatchSampler(const std::vector<int>& sample_labels, int num_identities_p,
                   int instances_per_identity_k, std::uint64_t seed);

    // Sample indices (into the label vector given at construction), grouped
    // into batches of exactly P*K.
    std::vector<std::vector<int>> next_epoch();

    int p() const { return p_; }
    int k() const { return k_; }

    // RNG state round trips through streams for checkpoint resumability.
    void save_state(std::ostream& out) const;
    void load_state(std::istream& in);

  private:
    std::map<int, std::vector<int>> by_label_;
    std::vector<int> labels_;
    int p_;
    int k_;
    Rng rng_;
};

}  // namespace lmid
