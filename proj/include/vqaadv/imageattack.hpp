#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "backend/services.hpp"
#include "coco.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "hash.hpp"
#include "image/codec.hpp"
#include "metrics/bertscore.hpp"
#include "tokenize.hpp"
#include "victim.hpp"

namespace vqaadv::imageattack {

using json = nlohmann::json;
using CategorySet = std::set<std::string>;

/// Surface term -> COCO category. Keys are stored as canonical token sequences.
class VocabularyMapping {
  public:
    VocabularyMapping() = default;

    void add(const std::string &term, const std::string &category) {
        if (!is_coco_category(category))
            throw ConfigError("vocabulary mapping: '" + category + "' is not a COCO category");
        auto key = tokenize(term).tokens;
        if (key.empty())
            throw ConfigError("vocabulary mapping: empty term");
        auto [it, fresh] = entries_.emplace(key, category);
        if (!fresh && it->second != category)
            throw ConfigError("vocabulary mapping: term '" + term + "' mapped twice");
        max_len_ = std::max(max_len_, key.size());
    }

    /// Accepts `{"entries": {...}}` or a flat object.
    static VocabularyMapping from_json(const json &doc) {
        const json &entries = doc.contains("entries") ? doc["entries"] : doc;
        if (!entries.is_object())
            throw ConfigError("vocabulary mapping must be a JSON object of term -> category");
        VocabularyMapping m;
        for (auto it = entries.begin(); it != entries.end(); ++it) {
            if (!it.value().is_string())
                throw ConfigError("vocabulary mapping: value of '" + it.key() + "' must be a string");
            m.add(it.key(), it.value().get<std::string>());
        }
        return m;
    }

    static VocabularyMapping load(const std::string &path) { return from_json(parse_json_file(path)); }

    const std::string *find(const std::vector<std::string> &key) const {
        auto it = entries_.find(key);
        return it == entries_.end() ? nullptr : &it->second;
    }

    std::size_t max_len() const { return max_len_; }
    std::size_t size() const { return entries_.size(); }

  private:
    std::map<std::vector<std::string>, std::string> entries_;
    std::size_t max_len_ = 0;
};

/// Singular candidates for a possibly plural token, most specific first.
inline std::vector<std::string> singular_forms(const std::string &w) {
    static const std::map<std::string, std::string> irregular = {
        {"people", "person"}, {"men", "man"},     {"women", "woman"}, {"children", "child"},
        {"mice", "mouse"},    {"knives", "knife"}, {"geese", "goose"}, {"feet", "foot"},
        {"teeth", "tooth"},   {"oxen", "ox"},     {"wolves", "wolf"}, {"shelves", "shelf"},
    };
    std::vector<std::string> out;
    if (auto it = irregular.find(w); it != irregular.end())
        out.push_back(it->second);
    auto ends = [&](std::string_view s) { return w.size() > s.size() && std::string_view(w).ends_with(s); };
    if (ends("ies"))
        out.push_back(w.substr(0, w.size() - 3) + "y");
    if (ends("es"))
        out.push_back(w.substr(0, w.size() - 2));
    if (ends("s") && !ends("ss"))
        out.push_back(w.substr(0, w.size() - 1));
    return out;
}

/// Greedy longest-match of mapping terms over the tokens. When a span does not
/// match verbatim, its last token is retried in singular form.
inline CategorySet map_to_coco(const TokenSeq &tokens, const VocabularyMapping &mapping) {
    CategorySet out;
    std::size_t i = 0;
    while (i < tokens.size()) {
        std::size_t matched = 0;
        for (std::size_t len = std::min(mapping.max_len(), tokens.size() - i); len >= 1 && !matched; --len) {
            std::vector<std::string> key(tokens.tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                         tokens.tokens.begin() + static_cast<std::ptrdiff_t>(i + len));
            const std::string *hit = mapping.find(key);
            for (const auto &s : hit ? std::vector<std::string>{} : singular_forms(key.back())) {
                key.back() = s;
                if ((hit = mapping.find(key)))
                    break;
            }
            if (hit) {
                out.insert(*hit);
                matched = len;
            }
        }
        i += matched ? matched : 1;
    }
    return out;
}

inline CategorySet map_to_coco(std::string_view text, const VocabularyMapping &mapping) {
    return map_to_coco(tokenize(text), mapping);
}

struct ObjectSets {
    CategorySet s_image;
    CategorySet s_qa;
    CategorySet s_explanation;
    CategorySet s_candidate;
    std::optional<std::string> s_target;
};

inline json to_json(const ObjectSets &s) {
    return json{{"s_image", s.s_image},
                {"s_qa", s.s_qa},
                {"s_explanation", s.s_explanation},
                {"s_candidate", s.s_candidate},
                {"s_target", s.s_target ? json(*s.s_target) : json(nullptr)}};
}

/// S_E ∩ (S_I \ S_QA).
inline CategorySet candidate_set(const CategorySet &s_explanation, const CategorySet &s_image,
                                 const CategorySet &s_qa) {
    CategorySet out;
    for (const auto &c : s_explanation)
        if (s_image.count(c) && !s_qa.count(c))
            out.insert(c);
    return out;
}

/// S_I from the annotations, S_QA from the question and every gold answer,
/// S_E from the victim's explanation on the clean input.
inline ObjectSets extract_object_sets(const Sample &sample, const std::string &victim_explanation,
                                      const ImageEntry &image, const VocabularyMapping &mapping) {
    ObjectSets s;
    for (const auto &inst : image.instances)
        s.s_image.insert(inst.category);
    s.s_qa = map_to_coco(sample.question, mapping);
    for (const auto &a : sample.gold_answers)
        for (const auto &c : map_to_coco(a, mapping))
            s.s_qa.insert(c);
    s.s_explanation = map_to_coco(victim_explanation, mapping);
    s.s_candidate = candidate_set(s.s_explanation, s.s_image, s.s_qa);
    return s;
}

inline ObjectSets extract_object_sets(const Sample &sample, const std::string &victim_explanation,
                                      const AnnotationIndex &annotations, const VocabularyMapping &mapping) {
    const ImageEntry *image = annotations.find(sample.image_id);
    if (!image)
        throw Error("image " + sample.image_ref + " of sample " + sample.sample_id + " missing from annotations");
    return extract_object_sets(sample, victim_explanation, *image, mapping);
}

/// Candidate with the most instances in the image; ties go to the larger total
/// box area, then to the alphabetically first name.
inline std::optional<std::string> select_target(const CategorySet &candidates, const ImageEntry &image) {
    std::optional<std::string> best;
    std::size_t best_count = 0;
    double best_area = 0;
    for (const auto &c : candidates) {
        std::size_t count = 0;
        double area = 0;
        for (const auto &inst : image.instances)
            if (inst.category == c) {
                ++count;
                area += inst.area;
            }
        bool better = !best || count > best_count ||
                      (count == best_count && (area > best_area || (area == best_area && c < *best)));
        if (better) {
            best = c;
            best_count = count;
            best_area = area;
        }
    }
    return best;
}

inline std::optional<std::string> select_target(const ObjectSets &sets, const ImageEntry &image) {
    return select_target(sets.s_candidate, image);
}

/// Binary mask as row-major run lengths, alternating and starting with a
/// (possibly empty) background run.
struct RemovalMask {
    int width = 0;
    int height = 0;
    int padding = 0;
    std::vector<std::uint32_t> runs;

    std::size_t area() const {
        std::size_t a = 0;
        for (std::size_t i = 1; i < runs.size(); i += 2)
            a += runs[i];
        return a;
    }
};

inline json to_json(const RemovalMask &m) {
    return json{{"width", m.width}, {"height", m.height}, {"padding", m.padding}, {"area", m.area()}, {"runs", m.runs}};
}

inline RemovalMask encode_mask(int width, int height, const std::vector<std::uint8_t> &raster, int padding = 0) {
    if (raster.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
        throw Error("mask raster size mismatch");
    RemovalMask m{width, height, padding, {}};
    std::uint8_t current = 0;
    std::uint32_t run = 0;
    for (std::uint8_t px : raster) {
        std::uint8_t bit = px ? 1 : 0;
        if (bit != current) {
            m.runs.push_back(run);
            run = 0;
            current = bit;
        }
        ++run;
    }
    m.runs.push_back(run);
    return m;
}

inline std::vector<std::uint8_t> decode_mask(const RemovalMask &m) {
    std::size_t total = static_cast<std::size_t>(m.width) * static_cast<std::size_t>(m.height);
    std::vector<std::uint8_t> raster;
    raster.reserve(total);
    for (std::size_t i = 0; i < m.runs.size(); ++i)
        raster.insert(raster.end(), m.runs[i], static_cast<std::uint8_t>(i % 2));
    if (raster.size() != total)
        throw Error("mask runs cover " + std::to_string(raster.size()) + " pixels, expected " + std::to_string(total));
    return raster;
}

/// Union of the target's instance boxes, each snapped outward to whole pixels,
/// grown by `padding` and clipped to the image.
inline RemovalMask build_mask(const ImageEntry &image, const std::string &target, int padding = 8) {
    if (padding < 0)
        throw ConfigError("mask padding must be >= 0");
    if (image.width <= 0 || image.height <= 0)
        throw Error("image " + std::to_string(image.image_id) + " has no dimensions");
    std::vector<std::uint8_t> raster(static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height), 0);
    bool any = false;
    for (const auto &inst : image.instances) {
        if (inst.category != target || inst.bbox.w <= 0 || inst.bbox.h <= 0)
            continue;
        auto clampi = [](double v, int hi) { return static_cast<int>(std::clamp(v, 0.0, static_cast<double>(hi))); };
        int x0 = clampi(std::floor(inst.bbox.x) - padding, image.width);
        int y0 = clampi(std::floor(inst.bbox.y) - padding, image.height);
        int x1 = clampi(std::ceil(inst.bbox.x + inst.bbox.w) + padding, image.width);
        int y1 = clampi(std::ceil(inst.bbox.y + inst.bbox.h) + padding, image.height);
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
                raster[static_cast<std::size_t>(y) * static_cast<std::size_t>(image.width) + static_cast<std::size_t>(x)] = 1;
                any = true;
            }
    }
    if (!any)
        throw Error("no non-degenerate box for '" + target + "' in image " + std::to_string(image.image_id));
    return encode_mask(image.width, image.height, raster, padding);
}

inline std::string mask_to_png(const RemovalMask &m) {
    return image::encode_bilevel_png(m.width, m.height, decode_mask(m));
}

/// Writes bytes as `<dir>/<sha256>.png` unless already present; returns the path.
inline std::string store_content_addressed(const std::filesystem::path &dir, const std::string &bytes,
                                           const std::string &ext = ".png") {
    std::string name = sha256_hex(bytes) + ext;
    std::filesystem::path p = dir / name;
    if (std::filesystem::exists(p))
        return p.string();
    std::filesystem::create_directories(dir);
    std::filesystem::path tmp = p;
    tmp += ".tmp" + std::to_string(fnv1a64(p.string() + std::to_string(bytes.size())));
    {
        std::ofstream out(tmp, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw Error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, p);
    return p.string();
}

struct InpaintOutcome {
    std::string edited_png;
    std::string edited_image_ref; // sha256 of the edited PNG
    double similarity = 0;
    bool low_similarity = false;
};

/// Inpaints the masked region and compares image embeddings of the original
/// and the edited picture. When `store_dir` is set the edited PNG is kept there.
inline InpaintOutcome inpaint_and_verify(const std::string &png, const RemovalMask &mask, backend::Client &client,
                                         double min_image_similarity = 0.5,
                                         const std::optional<std::filesystem::path> &store_dir = std::nullopt) {
    InpaintOutcome out;
    out.edited_png = backend::inpaint(client, png, mask_to_png(mask));
    out.edited_image_ref = sha256_hex(out.edited_png);
    if (store_dir)
        store_content_addressed(*store_dir, out.edited_png);
    auto vectors = backend::embed_images(client, {png, out.edited_png});
    out.similarity = vectors[0] == vectors[1] ? 1.0 : std::clamp(metrics::cosine(vectors[0], vectors[1]), -1.0, 1.0);
    out.low_similarity = out.similarity < min_image_similarity;
    return out;
}

struct ImageAttackConfig {
    int padding = 8;
    double min_image_similarity = 0.5;
};

inline void validate(const ImageAttackConfig &c) {
    if (c.padding < 0)
        throw ConfigError("padding must be >= 0");
    if (!(c.min_image_similarity >= -1.0 && c.min_image_similarity <= 1.0))
        throw ConfigError("min_image_similarity must be in [-1, 1]");
}

enum class Status { attacked, no_removable_object, failed };

inline std::string to_string(Status s) {
    switch (s) {
    case Status::attacked:
        return "attacked";
    case Status::no_removable_object:
        return "no-removable-object";
    case Status::failed:
        return "failed";
    }
    return "";
}

struct ImageAttackResult {
    std::string sample_id;
    Status status = Status::failed;
    std::string error;
    ObjectSets object_sets;
    std::optional<RemovalMask> mask;
    std::string edited_image_ref;
    std::optional<double> similarity;
    bool low_similarity = false;
    VictimOutput original;
    std::optional<VictimOutput> adversarial;
};

inline json to_json(const ImageAttackResult &r) {
    json j{{"sample_id", r.sample_id},
           {"status", to_string(r.status)},
           {"object_sets", to_json(r.object_sets)},
           {"original", to_json(r.original)}};
    if (!r.error.empty())
        j["error"] = r.error;
    if (r.mask) {
        json m = to_json(*r.mask);
        m.erase("runs");
        m["sha256"] = sha256_hex(mask_to_png(*r.mask));
        j["mask"] = m;
    }
    if (!r.edited_image_ref.empty())
        j["edited_image_ref"] = r.edited_image_ref;
    if (r.similarity)
        j["image_similarity"] = *r.similarity;
    if (r.low_similarity)
        j["flags"] = json::array({"low-image-similarity"});
    if (r.adversarial)
        j["adversarial"] = to_json(*r.adversarial);
    return j;
}

struct ImageAttackDeps {
    backend::Client &client; // inpaint, embed/image
    ImageVictim victim;      // vqa/generate bound to the sample question
    const ImageEntry *image; // annotations of the sample image, may be null
    const VocabularyMapping &mapping;
    std::string png;                              // clean image
    std::optional<std::filesystem::path> store_dir; // where edited images go
};

/// Plans and performs the removal of the most frequent explanation-cited object
/// that the question and answer do not mention.
inline ImageAttackResult run_image_attack(const Sample &sample, const ImageAttackConfig &config, ImageAttackDeps deps) {
    ImageAttackResult r;
    r.sample_id = sample.sample_id;
    try {
        if (!deps.image)
            throw Error("image " + sample.image_ref + " of sample " + sample.sample_id + " missing from annotations");
        r.original = deps.victim(deps.png);
        r.object_sets = extract_object_sets(sample, r.original.explanation, *deps.image, deps.mapping);
        r.object_sets.s_target = select_target(r.object_sets, *deps.image);
        if (!r.object_sets.s_target) {
            r.status = Status::no_removable_object;
            return r;
        }
        r.mask = build_mask(*deps.image, *r.object_sets.s_target, config.padding);
        InpaintOutcome edit =
            inpaint_and_verify(deps.png, *r.mask, deps.client, config.min_image_similarity, deps.store_dir);
        r.edited_image_ref = edit.edited_image_ref;
        r.similarity = edit.similarity;
        r.low_similarity = edit.low_similarity;
        r.adversarial = deps.victim(edit.edited_png);
        r.status = Status::attacked;
    } catch (const std::exception &e) {
        r.status = Status::failed;
        r.error = e.what();
    }
    return r;
}

} // namespace vqaadv::imageattack
