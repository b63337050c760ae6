// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "lmid/config.hpp"
#include "lmid/dataio.hpp"
#include "lmid/model.hpp"

namespace lmid {

struct EmbeddingRecord {
    int sample_index = 0;     // index into the manifest's sample list
    int identity_label = 0;
    std::vector<float> embedding;  // L2-normalized
};

struct RetrievalReport {
    double top1 = 0.0;
    double top5 = 0.0;
    double top10 = 0.0;
    std::vector<int> query_indices;
    std::vector<std::vector<int>> ranked;  // per query: gallery sample indices, best first
    std::string config_digest;

    void save_json(const std::string& path) const;
};

// Inference-mode embeddings for the given manifest samples; heatmaps are
// rendered from annotated coordinates, no augmentation. The heatmap config's
// image_size must match the dataset resolution.
std::vector<EmbeddingRecord> embed_all(const Model& model, const DatasetManifest& manifest,
                                       const std::vector<int>& sample_indices,
                                       const HeatmapConfig& heatmap_cfg, int batch_size = 64);

// Gallery sample indices by ascending Euclidean distance; ties break toward
// the lower sample index.
std::vector<int> rank_gallery(const EmbeddingRecord& query,
                              const std::vector<EmbeddingRecord>& gallery);

// Top-k hit iff any of the first k ranked gallery items shares the query's
// identity; fractions over all queries. Throws if a query identity is absent
// from the gallery.
RetrievalReport topk_accuracy(const std::vector<EmbeddingRecord>& queries,
                              const std::vector<EmbeddingRecord>& gallery);

// Convenience wrapper: embed gallery+query splits of a manifest and report.
RetrievalReport evaluate_retrieval(const Model& model, const DatasetManifest& manifest,
                                   const HeatmapConfig& heatmap_cfg, int batch_size = 64);

struct SweepRow {
    std::string label;
    double top1 = 0.0;
    double top5 = 0.0;
    double top10 = 0.0;
    std::string config_digest;
};

enum class SweepVariable { heatmap_radius, mla };

// Trains (when no checkpoint is present) and evaluates each setting of the
// sweep variable, in the paper's row order: radii 5/10/20% or MLA with/without.
std::vector<SweepRow> sensitivity_sweep(SweepVariable variable, const RunConfig& base,
                                        const std::string& data_root, const std::string& out_dir);

void write_sweep_table(const std::vector<SweepRow>& rows, const std::string& path);

// Fig.-style SVG of top-1 accuracy over epochs from one or more eval CSVs
// (columns epoch,top1,top5,top10); one polyline per file.
void write_accuracy_plot(const std::vector<std::string>& eval_csvs, const std::string& svg_path);

}  // namespace lmid
