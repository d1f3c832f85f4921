#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "../hash.hpp"
#include "../image/codec.hpp"
#include "../tokenize.hpp"
#include "client.hpp"
#include "endpoint.hpp"

namespace vqaadv::backend {

/// One scripted reply: applies when every `match` entry holds for the request.
/// String values match by substring; the virtual key `image_sha256` compares
/// the SHA-256 of the decoded `image_png_b64` payload.
struct Fixture {
    Endpoint endpoint;
    json match;
    json response;
};

inline std::vector<Fixture> parse_fixtures(const json &doc) {
    std::vector<Fixture> out;
    const json &list = doc.is_array() ? doc : doc.at("fixtures");
    for (const auto &f : list) {
        Fixture fx{endpoint_from_name(f.at("endpoint").get<std::string>()),
                   f.value("match", json::object()), f.at("response")};
        validate_response(fx.endpoint, fx.response);
        out.push_back(std::move(fx));
    }
    return out;
}

inline std::vector<Fixture> load_fixtures(const std::string &path) {
    try {
        return parse_fixtures(json::parse(read_file(path)));
    } catch (const json::exception &e) {
        throw ConfigError("fixtures " + path + ": " + e.what());
    }
}

struct StubOptions {
    bool echo_victim = false;      // vqa/generate answers "<answer> because <question>"
    bool identity_inpaint = false; // inpaint returns the input image unchanged
};

/// In-process, fully deterministic implementation of every endpoint.
/// Outputs depend only on (seed, fixtures, options, request).
class StubBackend : public Transport {
  public:
    static constexpr std::size_t kSentenceDim = 384;
    static constexpr std::size_t kTokenDim = 64;
    static constexpr std::size_t kImageDim = 64;

    explicit StubBackend(std::uint64_t seed, std::vector<Fixture> fixtures = {},
                         StubOptions options = {})
        : seed_(seed), fixtures_(std::move(fixtures)), options_(options) {
        SplitMix64 rng(mix_seed(seed_, "image-projection"));
        projection_.resize(kImageDim * kThumbDim);
        for (auto &w : projection_)
            w = rng.normal();
    }

    std::uint64_t seed() const { return seed_; }

    json send(Endpoint e, const json &request) override {
        if (auto hit = fixture_for(e, request))
            return *hit;
        switch (e) {
        case Endpoint::mlm_topk:
            return topk(request);
        case Endpoint::mlm_logprob:
            return logprob(request);
        case Endpoint::embed_sentence:
            return sentence(request);
        case Endpoint::embed_image:
            return image_embed(request);
        case Endpoint::embed_tokens:
            return token_embed(request);
        case Endpoint::vqa_generate:
            return generate(request);
        case Endpoint::inpaint:
            return inpaint(request);
        case Endpoint::llm_complete:
            return complete(request);
        case Endpoint::health:
            return health();
        }
        throw Error("unhandled endpoint");
    }

    json health() const {
        json models = json::object();
        for (auto e : kAllEndpoints)
            if (e != Endpoint::health)
                models[std::string(name(e))] = "stub-" + std::string(name(e)) + "/seed-" +
                                               std::to_string(seed_);
        return json{{"name", "vqaadv-stub"}, {"models", models}, {"protocol_version", "1"}};
    }

    /// Log-probability the stub MLM assigns to a sub-token, in [-5.05, -0.05].
    double token_logprob(std::string_view token) const {
        SplitMix64 rng(mix_seed(seed_, "logprob:" + std::string(token)));
        return -(0.05 + 5.0 * rng.uniform());
    }

  private:
    static constexpr std::size_t kThumb = 8;
    static constexpr std::size_t kThumbDim = kThumb * kThumb * 3;

    static bool field_matches(const json &request, const std::string &key, const json &want) {
        if (key == "image_sha256") {
            if (!request.contains("image_png_b64") || !want.is_string())
                return false;
            return sha256_hex(base64_decode(request["image_png_b64"].get<std::string>())) ==
                   want.get<std::string>();
        }
        if (!request.contains(key))
            return false;
        const json &have = request[key];
        if (want.is_string()) {
            std::string hay = have.is_string() ? have.get<std::string>() : have.dump();
            return hay.find(want.get<std::string>()) != std::string::npos;
        }
        return have == want;
    }

    std::optional<json> fixture_for(Endpoint e, const json &request) const {
        for (const auto &f : fixtures_) {
            if (f.endpoint != e)
                continue;
            bool all = true;
            for (auto it = f.match.begin(); it != f.match.end() && all; ++it)
                all = field_matches(request, it.key(), it.value());
            if (all)
                return std::optional<json>(std::in_place, f.response);
        }
        return std::nullopt;
    }

    static const std::vector<std::string> &word_pool() {
        static const std::vector<std::string> pool = {
            "using",   "holding", "wearing", "carrying", "near",    "beside",  "small",   "large",
            "old",     "new",     "young",   "white",    "black",   "red",     "green",   "blue",
            "open",    "closed",  "big",     "little",   "happy",   "busy",    "neat",    "clean",
            "tidy",    "messy",   "sitting", "standing", "walking", "running", "playing", "riding",
            "eating",  "looking", "watching", "person",  "animal",  "object",  "place",   "thing",
            "room",    "area",    "event",   "game",     "match",   "street",  "field",   "table",
        };
        return pool;
    }

    static const std::vector<std::string> &fragment_pool() {
        static const std::vector<std::string> pool = {"##ing", "##ed", "##er",  "##s",   "##ly",
                                                      "##les", "##ion", "##ant", "##ful", "##y"};
        return pool;
    }

    json topk(const json &req) const {
        TokenSeq seq = tokenize(req["text"].get<std::string>());
        int k = std::max(0, req["k"].get<int>());
        json slots = json::array();
        for (const auto &p : req["mask_positions"]) {
            int pos = p.get<int>();
            if (pos < 0 || static_cast<std::size_t>(pos) >= seq.size())
                throw TransportError("mask position out of range", false);
            const std::string &word = seq[static_cast<std::size_t>(pos)];
            std::size_t n_slots = word.size() > 6 ? 2 : 1;
            for (std::size_t s = 0; s < n_slots; ++s) {
                const auto &pool = s == 0 ? word_pool() : fragment_pool();
                SplitMix64 rng(mix_seed(seed_, "topk:" + word + "#" + std::to_string(s)));
                std::size_t start = static_cast<std::size_t>(rng.next() % pool.size());
                std::vector<std::pair<double, std::string>> cands;
                for (std::size_t j = 0; j < pool.size() && cands.size() < static_cast<std::size_t>(k); ++j) {
                    const std::string &tok = pool[(start + 7 * j) % pool.size()];
                    if (std::none_of(cands.begin(), cands.end(),
                                     [&](const auto &c) { return c.second == tok; }))
                        cands.emplace_back(token_logprob(tok), tok);
                }
                std::sort(cands.begin(), cands.end(), [](const auto &a, const auto &b) {
                    return a.first != b.first ? a.first > b.first : a.second < b.second;
                });
                json slot = json::array();
                for (const auto &[lp, tok] : cands)
                    slot.push_back({{"token", tok}, {"logprob", lp}});
                slots.push_back(slot);
            }
        }
        return json{{"slots", slots}};
    }

    json logprob(const json &req) const {
        json out = json::array();
        for (const auto &t : req["targets"])
            out.push_back(token_logprob(t.get<std::string>()));
        return json{{"logprobs", out}};
    }

    std::vector<double> sentence_vector(const std::string &text) const {
        std::vector<double> v(kSentenceDim, 0.0);
        for (const auto &tok : tokenize(text).tokens) {
            auto u = hashed_unit_vector(seed_, "sent:" + tok, kSentenceDim);
            for (std::size_t i = 0; i < v.size(); ++i)
                v[i] += u[i];
        }
        double norm = 0;
        for (double x : v)
            norm += x * x;
        if (norm > 0)
            for (double &x : v)
                x /= std::sqrt(norm);
        return v;
    }

    json sentence(const json &req) const {
        json out = json::array();
        for (const auto &t : req["texts"])
            out.push_back(sentence_vector(t.get<std::string>()));
        return json{{"vectors", out}};
    }

    json token_embed(const json &req) const {
        TokenSeq seq = tokenize(req["text"].get<std::string>());
        json vecs = json::array();
        for (const auto &tok : seq.tokens)
            vecs.push_back(hashed_unit_vector(seed_, "tok:" + tok, kTokenDim));
        return json{{"tokens", seq.tokens}, {"vectors", vecs}};
    }

    // Seeded random projection of an 8x8 average-pooled thumbnail, so visually
    // similar images get similar vectors.
    std::vector<double> image_vector(const std::string &bytes) const {
        image::RgbImage img;
        try {
            img = image::decode_png(bytes);
        } catch (const Error &) {
            return hashed_unit_vector(seed_, "img:" + sha256_hex(bytes), kImageDim);
        }
        std::vector<double> thumb(kThumbDim, 0.0);
        std::vector<double> count(kThumb * kThumb, 0.0);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                std::size_t cell = (static_cast<std::size_t>(y) * kThumb / img.height) * kThumb +
                                   static_cast<std::size_t>(x) * kThumb / img.width;
                const auto *px = img.at(x, y);
                for (int c = 0; c < 3; ++c)
                    thumb[cell * 3 + c] += px[c];
                count[cell] += 1.0;
            }
        for (std::size_t i = 0; i < kThumbDim; ++i)
            thumb[i] = count[i / 3] > 0 ? thumb[i] / count[i / 3] / 255.0 - 0.5 : 0.0;
        std::vector<double> v(kImageDim, 0.0);
        double norm = 0;
        for (std::size_t r = 0; r < kImageDim; ++r) {
            for (std::size_t c = 0; c < kThumbDim; ++c)
                v[r] += projection_[r * kThumbDim + c] * thumb[c];
            norm += v[r] * v[r];
        }
        if (norm == 0)
            return hashed_unit_vector(seed_, "img:" + sha256_hex(bytes), kImageDim);
        for (double &x : v)
            x /= std::sqrt(norm);
        return v;
    }

    json image_embed(const json &req) const {
        json out = json::array();
        for (const auto &b : req["images_png_b64"])
            out.push_back(image_vector(base64_decode(b.get<std::string>())));
        return json{{"vectors", out}};
    }

    static bool is_function_word(const std::string &t) {
        static const std::set<std::string> words = {
            "a",    "an",   "the",  "is",   "are",  "was",   "were", "be",   "this", "that",
            "these", "those", "what", "why", "how", "who",  "where", "when", "which", "do",
            "does", "did",  "of",   "in",   "on",   "at",    "to",   "for",  "with", "it",
            "there", "he",  "she",  "they", "his",  "her",   "their", "any", "have", "has",
            "can",  "and",  "or",   "by",   "from", "kind",  "type", "color", "many", "much",
        };
        return words.count(t) > 0;
    }

    // Question text of a victim input: everything before the knowledge or answer prefix.
    static std::string question_part(const std::string &input) {
        std::size_t cut = input.size();
        for (std::string_view marker : {" based on the fact that ", " <bos>"})
            cut = std::min(cut, input.find(marker));
        return input.substr(0, cut);
    }

    static std::string content_word(const std::string &text, const std::string &fallback) {
        auto toks = tokenize(text).tokens;
        for (auto it = toks.rbegin(); it != toks.rend(); ++it)
            if (!is_function_word(*it))
                return *it;
        return fallback;
    }

    json generate(const json &req) const {
        std::string input = req["input_text"].get<std::string>();
        std::string question = question_part(input);
        std::string image = base64_decode(req["image_png_b64"].get<std::string>());
        SplitMix64 rng(mix_seed(seed_, "gen:" + sha256_hex(image) + "|" + input));
        static const std::array<std::string_view, 8> answers = {
            "yes", "no", "two", "red", "white", "outside", "tennis", "sleeping"};
        std::string answer(answers[rng.next() % answers.size()]);
        if (options_.echo_victim)
            return json{{"text", answer + " because " + question}};
        static const std::array<std::string_view, 6> adjectives = {
            "visible", "in the picture", "close to the camera", "in the middle", "on the left",
            "on the right"};
        static const std::array<std::string_view, 8> extras = {
            "dining table", "chair", "cup", "dog", "car", "person", "bench", "umbrella"};
        std::string noun = content_word(question, "scene");
        std::string expl = "the " + noun + " is " + std::string(adjectives[rng.next() % adjectives.size()]) +
                           " and there is a " + std::string(extras[rng.next() % extras.size()]);
        return json{{"text", answer + " because " + expl}};
    }

    json inpaint(const json &req) const {
        if (options_.identity_inpaint)
            return json{{"image_png_b64", req["image_png_b64"]}};
        std::string bytes = base64_decode(req["image_png_b64"].get<std::string>());
        image::RgbImage img;
        std::vector<std::uint8_t> mask;
        int mw = 0, mh = 0;
        try {
            img = image::decode_png(bytes);
            mask = image::decode_bilevel_png(base64_decode(req["mask_png_b64"].get<std::string>()), mw, mh);
        } catch (const Error &e) {
            throw TransportError(std::string("inpaint: ") + e.what(), false);
        }
        if (mw != img.width || mh != img.height)
            throw TransportError("inpaint: mask and image sizes differ", false);
        // Fill masked pixels with the mean colour of the unmasked ones.
        std::array<double, 3> sum{0, 0, 0};
        double n = 0;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                if (!mask[static_cast<std::size_t>(y) * mw + x]) {
                    for (int c = 0; c < 3; ++c)
                        sum[c] += img.at(x, y)[c];
                    n += 1;
                }
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                if (mask[static_cast<std::size_t>(y) * mw + x])
                    for (int c = 0; c < 3; ++c)
                        img.at(x, y)[c] = static_cast<std::uint8_t>(n > 0 ? std::lround(sum[c] / n) : 0);
        return json{{"image_png_b64", base64_encode(image::encode_png(img))}};
    }

    json complete(const json &req) const {
        std::string prompt = req["prompt"].get<std::string>();
        SplitMix64 rng(mix_seed(seed_, "llm:" + prompt));
        if (prompt.find("Score:") != std::string::npos)
            return json{{"text", "Score: " + std::to_string(1 + rng.next() % 5)}};
        std::string question = prompt;
        if (auto at = prompt.rfind("Question:"); at != std::string::npos) {
            question = prompt.substr(at + 9);
            question = question.substr(0, question.find('\n'));
        }
        std::string noun = content_word(question, "object");
        return json{{"text", noun + " is a common sight in everyday scenes.\n" + noun +
                                 " can be recognised by its shape and colour."}};
    }

    std::uint64_t seed_;
    std::vector<Fixture> fixtures_;
    StubOptions options_;
    std::vector<double> projection_;
};

} // namespace vqaadv::backend
