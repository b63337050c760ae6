// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmid/dataio.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;
using nlohmann::json;

namespace lmid {

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::gallery: return "gallery";
        case Split::query: return "query";
    }
    throw std::logic_error("bad split");
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "gallery") return Split::gallery;
    if (s == "query") return Split::query;
    throw std::invalid_argument("unknown split: " + s);
}

std::vector<int> DatasetManifest::indices_of(Split s) const {
    std::vector<int> out;
    for (size_t i = 0; i < samples.size(); ++i)
        if (samples[i].split == s) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> DatasetManifest::identity_set(Split s) const {
    std::set<int> ids;
    for (const Sample& smp : samples)
        if (smp.split == s) ids.insert(smp.identity_label);
    return {ids.begin(), ids.end()};
}

void DatasetManifest::validate() const {
    for (const Sample& smp : samples) {
        if (smp.identity_label < 0) throw std::runtime_error("manifest: negative identity label");
        if (smp.identity_label >= static_cast<int>(identity_index.size()))
            throw std::runtime_error("manifest: identity label outside identity_index");
        if (smp.landmarks.k() != k) throw std::runtime_error("manifest: inconsistent landmark count");
    }
}

namespace {

json manifest_to_json(const DatasetManifest& m) {
    json j;
    j["k"] = m.k;
    j["landmark_names"] = m.landmark_names;
    j["identity_index"] = m.identity_index;
    j["provenance"] = {{"config_digest", m.provenance.config_digest}, {"seed", m.provenance.seed}};
    json samples = json::array();
    for (const Sample& s : m.samples) {
        samples.push_back({{"image", s.image_path},
                           {"identity", s.identity_label},
                           {"split", to_string(s.split)}});
    }
    j["samples"] = std::move(samples);
    return j;
}

std::string format_coord(double v) {
    std::ostringstream ss;
    ss.precision(6);
    ss << std::fixed << v;
    return ss.str();
}

}  // namespace

void save_manifest(const DatasetManifest& manifest) {
    fs::create_directories(manifest.root);
    {
        std::ofstream out(fs::path(manifest.root) / "manifest.json");
        if (!out) throw std::runtime_error("save_manifest: cannot write manifest.json under " + manifest.root);
        out << manifest_to_json(manifest).dump(2) << "\n";
    }
    std::ofstream csv(fs::path(manifest.root) / "landmarks.csv");
    if (!csv) throw std::runtime_error("save_manifest: cannot write landmarks.csv under " + manifest.root);
    csv << "image_path,landmark_name,x,y,visible\n";
    for (const Sample& s : manifest.samples) {
        for (int i = 0; i < s.landmarks.k(); ++i) {
            csv << s.image_path << ',' << s.landmarks.names[i] << ','
                << format_coord(s.landmarks.coords[i].x) << ','
                << format_coord(s.landmarks.coords[i].y) << ','
                << (s.landmarks.visible[i] ? 1 : 0) << '\n';
        }
    }
}

namespace {

bool parse_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

}  // namespace

DatasetManifest load_annotations(const std::string& root) {
    const fs::path manifest_path = fs::path(root) / "manifest.json";
    const fs::path csv_path = fs::path(root) / "landmarks.csv";
    std::ifstream mf(manifest_path);
    if (!mf) throw std::runtime_error("load_annotations: missing " + manifest_path.string());
    json j = json::parse(mf);

    DatasetManifest m;
    m.root = root;
    m.k = j.at("k").get<int>();
    m.landmark_names = j.at("landmark_names").get<std::vector<std::string>>();
    m.identity_index = j.at("identity_index").get<std::vector<std::string>>();
    if (j.contains("provenance")) {
        m.provenance.config_digest = j["provenance"].value("config_digest", "");
        m.provenance.seed = j["provenance"].value("seed", std::uint64_t{0});
    }

    std::map<std::string, int> name_to_channel;
    for (int i = 0; i < m.k; ++i) name_to_channel[m.landmark_names[i]] = i;

    std::map<std::string, int> sample_of_image;
    for (const json& js : j.at("samples")) {
        Sample s;
        s.image_path = js.at("image").get<std::string>();
        s.identity_label = js.at("identity").get<int>();
        s.split = split_from_string(js.at("split").get<std::string>());
        s.landmarks.names = m.landmark_names;
        s.landmarks.coords.assign(m.k, Point2{});
        s.landmarks.visible.assign(m.k, false);
        sample_of_image[s.image_path] = static_cast<int>(m.samples.size());
        m.samples.push_back(std::move(s));
    }

    std::ifstream csv(csv_path);
    if (!csv) throw std::runtime_error("load_annotations: missing " + csv_path.string());

    std::vector<std::string> problems;
    std::set<std::pair<std::string, std::string>> seen_rows;
    std::string line;
    std::getline(csv, line);  // header
    int lineno = 1;
    while (std::getline(csv, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        const std::string where = "landmarks.csv:" + std::to_string(lineno);
        if (fields.size() != 5) {
            problems.push_back(where + ": expected 5 columns, got " + std::to_string(fields.size()));
            continue;
        }
        auto found = sample_of_image.find(fields[0]);
        if (found == sample_of_image.end()) {
            problems.push_back(where + ": image not in manifest: " + fields[0]);
            continue;
        }
        auto channel = name_to_channel.find(fields[1]);
        if (channel == name_to_channel.end()) {
            problems.push_back(where + ": unknown landmark name: " + fields[1]);
            continue;
        }
        if (!seen_rows.insert({fields[0], fields[1]}).second) {
            problems.push_back(where + ": duplicate (image, landmark) row");
            continue;
        }
        const bool vis = fields[4] == "1";
        if (!vis && fields[4] != "0") {
            problems.push_back(where + ": visible must be 0 or 1, got " + fields[4]);
            continue;
        }
        double x = 0.0, y = 0.0;
        if (vis && (!parse_double(fields[2], x) || !parse_double(fields[3], y))) {
            problems.push_back(where + ": non-numeric coordinates");
            continue;
        }
        if (!vis) {
            parse_double(fields[2], x);  // coords of invisible landmarks are ignored
            parse_double(fields[3], y);
        }
        Sample& s = m.samples[found->second];
        s.landmarks.coords[channel->second] = {x, y};
        s.landmarks.visible[channel->second] = vis;
    }

    for (const Sample& s : m.samples) {
        if (!fs::exists(fs::path(root) / s.image_path))
            problems.push_back("missing image file: " + s.image_path);
    }
    if (!problems.empty()) {
        std::string msg = "load_annotations found " + std::to_string(problems.size()) + " problem(s):";
        for (const std::string& p : problems) msg += "\n  " + p;
        throw std::runtime_error(msg);
    }
    m.validate();
    return m;
}

DatasetManifest build_real_splits(const DatasetManifest& manifest, int per_id_gallery, Rng& rng) {
    DatasetManifest out = manifest;
    std::map<int, std::vector<int>> test_by_id;
    for (size_t i = 0; i < out.samples.size(); ++i) {
        if (out.samples[i].split == Split::train)
            out.samples[i].split = Split::gallery;  // train images all join the gallery
        else
            test_by_id[out.samples[i].identity_label].push_back(static_cast<int>(i));
    }
    for (auto& [label, indices] : test_by_id) {
        if (static_cast<int>(indices.size()) <= per_id_gallery)
            throw std::runtime_error("build_real_splits: test identity " + std::to_string(label) +
                                     " has only " + std::to_string(indices.size()) +
                                     " images (need > " + std::to_string(per_id_gallery) + ")");
        std::shuffle(indices.begin(), indices.end(), rng);
        for (size_t i = 0; i < indices.size(); ++i)
            out.samples[indices[i]].split =
                i < static_cast<size_t>(per_id_gallery) ? Split::gallery : Split::query;
    }
    return out;
}

DatasetManifest hide_random_landmarks(const DatasetManifest& manifest, double frac, Rng& rng) {
    if (frac < 0.0 || frac > 1.0) throw std::invalid_argument("hide_random_landmarks: frac in [0,1]");
    DatasetManifest out = manifest;
    for (Sample& s : out.samples) {
        if (uniform(rng, 0.0, 1.0) >= frac) continue;
        std::vector<int> vis;
        for (int i = 0; i < s.landmarks.k(); ++i)
            if (s.landmarks.visible[i]) vis.push_back(i);
        if (vis.empty()) continue;
        s.landmarks.visible[vis[uniform_int(rng, 0, static_cast<int>(vis.size()) - 1)]] = false;
    }
    return out;
}

DatasetManifest materialize_manifest(const DatasetManifest& manifest, const std::string& new_root) {
    DatasetManifest out = manifest;
    out.root = new_root;
    for (const Sample& s : manifest.samples) {
        const fs::path src = fs::path(manifest.root) / s.image_path;
        const fs::path dst = fs::path(new_root) / s.image_path;
        fs::create_directories(dst.parent_path());
        if (fs::exists(dst)) continue;
        std::error_code ec;
        fs::create_hard_link(src, dst, ec);
        if (ec) fs::copy_file(src, dst);
    }
    save_manifest(out);
    return out;
}

PkBatchSampler::PkBatchSampler(const std::vector<int>& sample_labels, int num_identities_p,
                               int instances_per_identity_k, std::uint64_t seed)
    : labels_(sample_labels), p_(num_identities_p), k_(instances_per_identity_k), rng_(seed) {
    if (k_ < 2) throw std::invalid_argument("PkBatchSampler: K must be >= 2");
    for (size_t i = 0; i < labels_.size(); ++i) by_label_[labels_[i]].push_back(static_cast<int>(i));
    if (p_ > static_cast<int>(by_label_.size()))
        throw std::invalid_argument("PkBatchSampler: P exceeds identity count");
    if (static_cast<size_t>(p_) * k_ > labels_.size())
        throw std::invalid_argument("PkBatchSampler: P*K exceeds dataset size");
}

std::vector<std::vector<int>> PkBatchSampler::next_epoch() {
    std::vector<int> ids;
    ids.reserve(by_label_.size());
    for (const auto& [label, _] : by_label_) ids.push_back(label);
    std::shuffle(ids.begin(), ids.end(), rng_);

    // pad the trailing chunk with identities not already in it so every
    // batch holds exactly P distinct identities
    const int chunks = static_cast<int>((ids.size() + p_ - 1) / p_);
    std::vector<std::vector<int>> batches;
    for (int c = 0; c < chunks; ++c) {
        std::vector<int> batch_ids(ids.begin() + c * p_,
                                   ids.begin() + std::min<size_t>((c + 1) * p_, ids.size()));
        if (static_cast<int>(batch_ids.size()) < p_) {
            std::set<int> used(batch_ids.begin(), batch_ids.end());
            std::vector<int> pool;
            for (int id : ids)
                if (!used.count(id)) pool.push_back(id);
            std::shuffle(pool.begin(), pool.end(), rng_);
            batch_ids.insert(batch_ids.end(), pool.begin(),
                             pool.begin() + (p_ - batch_ids.size()));
        }
        std::vector<int> batch;
        batch.reserve(static_cast<size_t>(p_) * k_);
        for (int id : batch_ids) {
            // shuffle a copy: sampler state beyond rng_ must stay fixed so
            // checkpointed runs resume exactly
            std::vector<int> pool = by_label_[id];
            std::shuffle(pool.begin(), pool.end(), rng_);
            for (int j = 0; j < k_; ++j)
                batch.push_back(pool[static_cast<size_t>(j) % pool.size()]);
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

void PkBatchSampler::save_state(std::ostream& out) const { out << rng_; }

void PkBatchSampler::load_state(std::istream& in) { in >> rng_; }

}  // namespace lmid
