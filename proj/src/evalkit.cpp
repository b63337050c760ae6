// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmid/evalkit.hpp"

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "lmid/tensorize.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace lmid {

std::vector<EmbeddingRecord> embed_all(const Model& model, const DatasetManifest& manifest,
                                       const std::vector<int>& sample_indices,
                                       const HeatmapConfig& heatmap_cfg, int batch_size) {
    model->eval();
    torch::NoGradGuard no_grad;
    const int k = model->config().k;
    if (k > 0 && manifest.k != k)
        throw std::runtime_error("embed_all: checkpoint expects k=" + std::to_string(k) +
                                 " landmarks, dataset has k=" + std::to_string(manifest.k));

    const ImageNorm norm = norm_for(model->config());
    std::vector<EmbeddingRecord> records;
    records.reserve(sample_indices.size());
    for (size_t start = 0; start < sample_indices.size(); start += batch_size) {
        const size_t stop = std::min(sample_indices.size(), start + batch_size);
        std::vector<torch::Tensor> inputs;
        for (size_t i = start; i < stop; ++i) {
            const Sample& s = manifest.samples[sample_indices[i]];
            const cv::Mat1b img = load_gray_image(manifest.root, s.image_path);
            inputs.push_back(sample_to_tensor(img, s.landmarks, k, heatmap_cfg, norm));
        }
        const auto out = model->forward(torch::stack(inputs));
        const auto normalized =
            torch::nn::functional::normalize(out.embedding,
                                             torch::nn::functional::NormalizeFuncOptions().dim(1));
        const auto cpu = normalized.contiguous().to(torch::kFloat32);
        for (size_t i = start; i < stop; ++i) {
            EmbeddingRecord rec;
            rec.sample_index = sample_indices[i];
            rec.identity_label = manifest.samples[sample_indices[i]].identity_label;
            const float* row = cpu[i - start].const_data_ptr<float>();
            rec.embedding.assign(row, row + cpu.size(1));
            records.push_back(std::move(rec));
        }
    }
    return records;
}

std::vector<int> rank_gallery(const EmbeddingRecord& query,
                              const std::vector<EmbeddingRecord>& gallery) {
    if (gallery.empty()) throw std::invalid_argument("rank_gallery: empty gallery");
    std::vector<std::pair<double, int>> scored;
    scored.reserve(gallery.size());
    for (const EmbeddingRecord& g : gallery) {
        double d2 = 0.0;
        for (size_t i = 0; i < query.embedding.size(); ++i) {
            const double diff = static_cast<double>(query.embedding[i]) - g.embedding[i];
            d2 += diff * diff;
        }
        scored.emplace_back(d2, g.sample_index);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<int> out;
    out.reserve(scored.size());
    for (const auto& [d, id] : scored) out.push_back(id);
    return out;
}

RetrievalReport topk_accuracy(const std::vector<EmbeddingRecord>& queries,
                              const std::vector<EmbeddingRecord>& gallery) {
    std::set<int> gallery_ids;
    std::map<int, int> label_of;
    for (const EmbeddingRecord& g : gallery) {
        gallery_ids.insert(g.identity_label);
        label_of[g.sample_index] = g.identity_label;
    }
    RetrievalReport report;
    int hit1 = 0, hit5 = 0, hit10 = 0;
    for (const EmbeddingRecord& q : queries) {
        if (!gallery_ids.count(q.identity_label))
            throw std::runtime_error("topk_accuracy: query identity " +
                                     std::to_string(q.identity_label) + " absent from gallery");
        const auto ranked = rank_gallery(q, gallery);
        int match_rank = -1;
        for (size_t r = 0; r < ranked.size(); ++r) {
            if (label_of[ranked[r]] == q.identity_label) {
                match_rank = static_cast<int>(r);
                break;
            }
        }
        if (match_rank >= 0 && match_rank < 1) ++hit1;
        if (match_rank >= 0 && match_rank < 5) ++hit5;
        if (match_rank >= 0 && match_rank < 10) ++hit10;
        report.query_indices.push_back(q.sample_index);
        report.ranked.push_back(ranked);
    }
    const double n = static_cast<double>(queries.size());
    report.top1 = hit1 / n;
    report.top5 = hit5 / n;
    report.top10 = hit10 / n;
    return report;
}

RetrievalReport evaluate_retrieval(const Model& model, const DatasetManifest& manifest,
                                   const HeatmapConfig& heatmap_cfg, int batch_size) {
    const auto gallery =
        embed_all(model, manifest, manifest.indices_of(Split::gallery), heatmap_cfg, batch_size);
    const auto queries =
        embed_all(model, manifest, manifest.indices_of(Split::query), heatmap_cfg, batch_size);
    return topk_accuracy(queries, gallery);
}

void RetrievalReport::save_json(const std::string& path) const {
    json j;
    j["top1"] = top1;
    j["top5"] = top5;
    j["top10"] = top10;
    j["averaged_over"] = "queries";
    j["config_digest"] = config_digest;
    j["query_indices"] = query_indices;
    j["ranked"] = ranked;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << j.dump() << "\n";
}

void write_sweep_table(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write table: " + path);
    out << "model,top1,top5,top10,config_digest\n";
    for (const SweepRow& r : rows) {
        out << r.label << ',' << r.top1 << ',' << r.top5 << ',' << r.top10 << ','
            << r.config_digest << '\n';
    }
}

void write_accuracy_plot(const std::vector<std::string>& eval_csvs, const std::string& svg_path) {
    struct Curve {
        std::string label;
        std::vector<std::pair<double, double>> points;  // epoch, top1
    };
    std::vector<Curve> curves;
    double max_epoch = 1.0;
    for (const std::string& path : eval_csvs) {
        Curve c;
        c.label = fs::path(path).parent_path().filename().string();
        if (c.label.empty()) c.label = fs::path(path).stem().string();
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot read eval csv: " + path);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string field;
            std::vector<double> vals;
            while (std::getline(ss, field, ',')) vals.push_back(std::stod(field));
            if (vals.size() >= 2) {
                c.points.emplace_back(vals[0], vals[1]);
                max_epoch = std::max(max_epoch, vals[0]);
            }
        }
        curves.push_back(std::move(c));
    }

    const int w = 760, h = 480, ml = 60, mb = 40, mt = 20, mr = 20;
    auto sx = [&](double e) { return ml + (w - ml - mr) * e / max_epoch; };
    auto sy = [&](double a) { return h - mb - (h - mb - mt) * a; };
    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"};

    std::ofstream out(svg_path);
    if (!out) throw std::runtime_error("cannot write svg: " + svg_path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    for (int tick = 0; tick <= 10; ++tick) {
        const double acc = tick / 10.0;
        out << "<line x1='" << ml << "' y1='" << sy(acc) << "' x2='" << w - mr << "' y2='"
            << sy(acc) << "' stroke='#dddddd'/>\n";
        out << "<text x='" << ml - 8 << "' y='" << sy(acc) + 4
            << "' text-anchor='end' font-size='11'>" << static_cast<int>(acc * 100) << "%</text>\n";
    }
    out << "<text x='" << (ml + w - mr) / 2 << "' y='" << h - 8
        << "' text-anchor='middle' font-size='12'>epoch</text>\n";
    out << "<text x='16' y='" << (mt + h - mb) / 2
        << "' text-anchor='middle' font-size='12' transform='rotate(-90 16 "
        << (mt + h - mb) / 2 << ")'>top-1 accuracy</text>\n";
    for (size_t c = 0; c < curves.size(); ++c) {
        const char* color = palette[c % 5];
        out << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
        for (const auto& [e, a] : curves[c].points) out << sx(e) << "," << sy(a) << " ";
        out << "'/>\n";
        out << "<text x='" << w - mr - 4 << "' y='" << mt + 16 + 16 * c
            << "' text-anchor='end' font-size='12' fill='" << color << "'>" << curves[c].label
            << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace lmid
