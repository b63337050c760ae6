// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <opencv2/imgcodecs.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "lmid/dataio.hpp"
#include "lmid/digest.hpp"
#include "lmid/synthgen.hpp"

namespace fs = std::filesystem;
using namespace lmid;

namespace {

// Builds a manifest in the synthgen layout with tiny placeholder images.
DatasetManifest write_corpus(const std::string& root, int n_train_ids, int train_per_id,
                             int n_test_ids, const std::vector<int>& test_counts, int k = 5) {
    fs::remove_all(root);
    DatasetManifest m;
    m.root = root;
    m.k = k;
    for (int i = 0; i < k; ++i) m.landmark_names.push_back("lm" + std::to_string(i));
    const cv::Mat1b dot(4, 4, uchar(128));

    auto add = [&](int label, int index, Split split) {
        Sample s;
        s.image_path = to_string(split) + "/" + std::to_string(label) + "/" +
                       std::to_string(index) + ".png";
        s.identity_label = label;
        s.split = split;
        s.landmarks.names = m.landmark_names;
        for (int i = 0; i < k; ++i) {
            s.landmarks.coords.push_back({1.0 * i + index, 2.0 * i});
            s.landmarks.visible.push_back(true);
        }
        const fs::path file = fs::path(root) / s.image_path;
        fs::create_directories(file.parent_path());
        cv::imwrite(file.string(), dot);
        m.samples.push_back(std::move(s));
    };

    int label = 0;
    for (int id = 0; id < n_train_ids; ++id, ++label) {
        m.identity_index.push_back("train-" + std::to_string(id));
        for (int e = 0; e < train_per_id; ++e) add(label, e, Split::train);
    }
    for (int id = 0; id < n_test_ids; ++id, ++label) {
        m.identity_index.push_back("test-" + std::to_string(id));
        for (int e = 0; e < test_counts[id]; ++e) add(label, e, Split::query);
    }
    save_manifest(m);
    return m;
}

}  // namespace

TEST_CASE("synthgen output round-trips through load_annotations") {
    SynthConfig cfg;
    cfg.n_identities = 3;
    cfg.image_size = 64;
    cfg.examples_per_split = {2, 2, 2};
    cfg.master_seed = 7;
    const std::string root = (fs::temp_directory_path() / "lmid-roundtrip").string();
    fs::remove_all(root);
    const DatasetManifest built = build_dataset(cfg, root);
    const DatasetManifest loaded = load_annotations(root);

    REQUIRE(loaded.samples.size() == built.samples.size());
    CHECK(loaded.k == built.k);
    CHECK(loaded.identity_index == built.identity_index);
    std::map<std::string, const Sample*> by_path;
    for (const Sample& s : built.samples) by_path[s.image_path] = &s;
    for (const Sample& s : loaded.samples) {
        const Sample* b = by_path.at(s.image_path);
        CHECK(s.identity_label == b->identity_label);
        CHECK(s.split == b->split);
        for (int i = 0; i < loaded.k; ++i) {
            CHECK(s.landmarks.visible[i] == b->landmarks.visible[i]);
            if (s.landmarks.visible[i]) {
                // CSV stores 6 decimal places
                CHECK(s.landmarks.coords[i].x ==
                      doctest::Approx(b->landmarks.coords[i].x).epsilon(1e-5));
                CHECK(s.landmarks.coords[i].y ==
                      doctest::Approx(b->landmarks.coords[i].y).epsilon(1e-5));
            }
        }
    }
    // save -> load -> save is byte stable
    const std::string copy = (fs::temp_directory_path() / "lmid-roundtrip-copy").string();
    DatasetManifest resaved = loaded;
    resaved.root = copy;
    fs::remove_all(copy);
    fs::create_directories(copy);
    save_manifest(resaved);
    CHECK(digest_file((fs::path(root) / "landmarks.csv").string()) ==
          digest_file((fs::path(copy) / "landmarks.csv").string()));
    fs::remove_all(root);
    fs::remove_all(copy);
}

TEST_CASE("invisible rows keep visibility false regardless of coords") {
    const std::string root = (fs::temp_directory_path() / "lmid-invisible").string();
    DatasetManifest m = write_corpus(root, 1, 1, 0, {}, 2);
    m.samples[0].landmarks.visible[1] = false;
    save_manifest(m);
    const DatasetManifest loaded = load_annotations(root);
    CHECK(loaded.samples[0].landmarks.visible[0]);
    CHECK(!loaded.samples[0].landmarks.visible[1]);
    fs::remove_all(root);
}

TEST_CASE("malformed rows are all reported at once") {
    const std::string root = (fs::temp_directory_path() / "lmid-malformed").string();
    write_corpus(root, 1, 2, 0, {}, 2);
    {
        std::ofstream csv(fs::path(root) / "landmarks.csv");  // rewrite from scratch
        csv << "image_path,landmark_name,x,y,visible\n";
        csv << "train/0/0.png,lm0,1.0,2.0,1\n";
        csv << "train/0/0.png,lm1,1.0,2.0,1\n";
        csv << "train/0/1.png,lm0,1.0,2.0,1\n";
        csv << "train/0/1.png,lm1,abc,2.0,1\n";       // non-numeric coordinate
        csv << "train/0/0.png,lm0,1.0,2.0,1\n";       // duplicate row
        csv << "train/0/1.png,nosuch,1.0,2.0,1\n";    // unknown landmark
        csv << "missing/0/9.png,lm0,1.0,2.0,1\n";     // image not in manifest
    }
    try {
        load_annotations(root);
        FAIL("expected load_annotations to throw");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("duplicate") != std::string::npos);
        CHECK(msg.find("non-numeric") != std::string::npos);
        CHECK(msg.find("unknown landmark") != std::string::npos);
        CHECK(msg.find("not in manifest") != std::string::npos);
        CHECK(msg.find("4 problem(s)") != std::string::npos);
    }
    fs::remove_all(root);
}

TEST_CASE("missing image files are reported") {
    const std::string root = (fs::temp_directory_path() / "lmid-missingimg").string();
    write_corpus(root, 1, 2, 0, {}, 2);
    fs::remove(fs::path(root) / "train" / "0" / "1.png");
    CHECK_THROWS_WITH_AS(load_annotations(root),
                         doctest::Contains("missing image file: train/0/1.png"),
                         std::runtime_error);
    fs::remove_all(root);
}

TEST_CASE("manta-shaped corpus: 110 train identities / 1422 images accepted") {
    const std::string root = (fs::temp_directory_path() / "lmid-manta").string();
    // 110 train ids x 12 images = 1320, plus 102 distributed = 1422 total
    DatasetManifest m = write_corpus(root, 110, 12, 0, {}, 5);
    const cv::Mat1b dot(4, 4, uchar(128));
    for (int extra = 0; extra < 102; ++extra) {
        Sample s = m.samples[extra];  // clone an existing identity's sample
        s.image_path = "train/" + std::to_string(s.identity_label) + "/extra" +
                       std::to_string(extra) + ".png";
        cv::imwrite((fs::path(root) / s.image_path).string(), dot);
        m.samples.push_back(std::move(s));
    }
    save_manifest(m);
    const DatasetManifest loaded = load_annotations(root);
    CHECK(loaded.indices_of(Split::train).size() == 1422);
    CHECK(loaded.identity_set(Split::train).size() == 110);
    CHECK(loaded.k == 5);
    fs::remove_all(root);
}

TEST_CASE("build_real_splits reproduces the paper's gallery/query arithmetic") {
    const std::string root = (fs::temp_directory_path() / "lmid-realsplit").string();
    // 18 test identities with 321 images total
    std::vector<int> counts(18, 321 / 18);  // 17 each = 306
    for (int i = 0; i < 321 - 306; ++i) ++counts[i];
    DatasetManifest m = write_corpus(root, 5, 4, 18, counts, 5);
    REQUIRE(m.samples.size() == 5 * 4 + 321);

    Rng rng(9);
    const DatasetManifest split = build_real_splits(m, 2, rng);
    const auto gallery = split.indices_of(Split::gallery);
    const auto query = split.indices_of(Split::query);
    CHECK(gallery.size() == 5 * 4 + 18 * 2);  // all train images + 36 test images
    CHECK(query.size() == 321 - 36);          // 285 remaining test images

    // every query identity has exactly two matching gallery examples
    std::map<int, int> gallery_count;
    for (int idx : gallery) gallery_count[split.samples[idx].identity_label]++;
    std::set<int> query_ids;
    for (int idx : query) query_ids.insert(split.samples[idx].identity_label);
    for (int id : query_ids) CHECK(gallery_count[id] == 2);
    fs::remove_all(root);
}

TEST_CASE("per_id_gallery=0 keeps the gallery to former train images only") {
    const std::string root = (fs::temp_directory_path() / "lmid-realsplit0").string();
    DatasetManifest m = write_corpus(root, 3, 2, 4, {3, 3, 3, 3}, 2);
    Rng rng(1);
    const DatasetManifest split = build_real_splits(m, 0, rng);
    CHECK(split.indices_of(Split::gallery).size() == 6);
    CHECK(split.indices_of(Split::query).size() == 12);
    fs::remove_all(root);
}

TEST_CASE("build_real_splits is deterministic under one seed and rejects scarce identities") {
    const std::string root = (fs::temp_directory_path() / "lmid-realsplit-det").string();
    DatasetManifest m = write_corpus(root, 2, 2, 3, {5, 4, 6}, 2);
    Rng rng_a(77), rng_b(77);
    const DatasetManifest a = build_real_splits(m, 2, rng_a);
    const DatasetManifest b = build_real_splits(m, 2, rng_b);
    for (size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i].split == b.samples[i].split);

    DatasetManifest scarce = write_corpus(root + "-scarce", 1, 2, 2, {2, 5}, 2);
    Rng rng_c(1);
    CHECK_THROWS(build_real_splits(scarce, 2, rng_c));
    fs::remove_all(root);
    fs::remove_all(root + "-scarce");
}

TEST_CASE("pk sampler yields P identities x K instances with duplicates when needed") {
    // 6 identities: labels 0..5, identity 3 has only 3 images, K = 4
    std::vector<int> labels;
    for (int id = 0; id < 6; ++id)
        for (int e = 0; e < (id == 3 ? 3 : 5); ++e) labels.push_back(id);

    PkBatchSampler sampler(labels, 4, 4, 42);
    const auto epoch = sampler.next_epoch();
    REQUIRE(!epoch.empty());
    std::set<int> seen_ids;
    for (const auto& batch : epoch) {
        REQUIRE(batch.size() == 16);
        std::map<int, int> counts;
        std::map<int, std::set<int>> distinct;
        for (int idx : batch) {
            counts[labels[idx]]++;
            distinct[labels[idx]].insert(idx);
            seen_ids.insert(labels[idx]);
        }
        CHECK(counts.size() == 4);
        for (const auto& [label, count] : counts) {
            CHECK(count == 4);
            if (label == 3) CHECK(distinct[label].size() == 3);  // one duplicate present
        }
    }
    CHECK(seen_ids.size() == 6);  // epoch covers every identity

    // every anchor admits a positive (K >= 2) and a negative (P >= 2) by construction
    for (const auto& batch : epoch) {
        std::map<int, int> counts;
        for (int idx : batch) counts[labels[idx]]++;
        for (int idx : batch) {
            CHECK(counts[labels[idx]] >= 2);
            CHECK(static_cast<int>(batch.size()) - counts[labels[idx]] >= 1);
        }
    }
}

TEST_CASE("pk sampler epoch label histogram gives every identity at least K slots") {
    std::vector<int> labels;
    for (int id = 0; id < 10; ++id)
        for (int e = 0; e < 4; ++e) labels.push_back(id);
    PkBatchSampler sampler(labels, 3, 4, 5);
    std::map<int, int> histogram;
    for (const auto& batch : sampler.next_epoch())
        for (int idx : batch) histogram[labels[idx]]++;
    for (int id = 0; id < 10; ++id) CHECK(histogram[id] >= 4);
}

TEST_CASE("pk sampler validates its preconditions") {
    std::vector<int> labels = {0, 0, 1, 1};
    CHECK_THROWS(PkBatchSampler(labels, 3, 2, 1));  // P exceeds identity count
    CHECK_THROWS(PkBatchSampler(labels, 2, 1, 1));  // K < 2
    CHECK_THROWS(PkBatchSampler(labels, 2, 3, 1));  // P*K exceeds dataset size
}

TEST_CASE("hide_random_landmarks hides one landmark in roughly the requested fraction") {
    const std::string root = (fs::temp_directory_path() / "lmid-hide").string();
    DatasetManifest m = write_corpus(root, 40, 5, 0, {}, 3);
    Rng rng(123);
    const DatasetManifest masked = hide_random_landmarks(m, 0.3, rng);
    int fully_visible = 0, one_hidden = 0;
    for (const Sample& s : masked.samples) {
        const int visible = s.landmarks.visible_count();
        if (visible == 3) ++fully_visible;
        if (visible == 2) ++one_hidden;
        CHECK(visible >= 2);
    }
    const double frac = one_hidden / 200.0;
    CHECK(frac > 0.2);
    CHECK(frac < 0.4);
    fs::remove_all(root);
}

TEST_CASE("materialize_manifest produces a loadable self-contained dataset") {
    const std::string root = (fs::temp_directory_path() / "lmid-mat-src").string();
    const std::string dst = (fs::temp_directory_path() / "lmid-mat-dst").string();
    DatasetManifest m = write_corpus(root, 2, 2, 0, {}, 2);
    fs::remove_all(dst);
    materialize_manifest(m, dst);
    const DatasetManifest loaded = load_annotations(dst);
    CHECK(loaded.samples.size() == m.samples.size());
    fs::remove_all(root);
    fs::remove_all(dst);
}
