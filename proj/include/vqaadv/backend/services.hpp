#pragma once

#include <string>
#include <vector>

#include "../hash.hpp"
#include "../metrics/bertscore.hpp"
#include "client.hpp"

// Typed wrappers over the wire protocol.

namespace vqaadv::backend {

struct SubToken {
    std::string token;
    double logprob = 0;
};

using Slots = std::vector<std::vector<SubToken>>;

inline Slots mlm_topk(Client &c, const std::string &text, const std::vector<int> &mask_positions,
                      int k) {
    json r = c.call(Endpoint::mlm_topk, {{"text", text}, {"mask_positions", mask_positions}, {"k", k}});
    Slots slots;
    for (const auto &slot : r["slots"]) {
        std::vector<SubToken> cands;
        for (const auto &t : slot)
            cands.push_back({t["token"].get<std::string>(), t["logprob"].get<double>()});
        slots.push_back(std::move(cands));
    }
    return slots;
}

inline std::vector<double> mlm_logprob(Client &c, const std::string &text,
                                       const std::vector<int> &positions,
                                       const std::vector<std::string> &targets) {
    json r = c.call(Endpoint::mlm_logprob,
                    {{"text", text}, {"positions", positions}, {"targets", targets}});
    auto out = r["logprobs"].get<std::vector<double>>();
    if (out.size() != targets.size())
        throw SchemaError("mlm/logprob response", "logprobs", "one value per target expected");
    return out;
}

inline std::vector<std::vector<double>> embed_sentences(Client &c,
                                                        const std::vector<std::string> &texts) {
    json r = c.call(Endpoint::embed_sentence, {{"texts", texts}});
    auto out = r["vectors"].get<std::vector<std::vector<double>>>();
    if (out.size() != texts.size())
        throw SchemaError("embed/sentence response", "vectors", "one vector per text expected");
    return out;
}

inline std::vector<std::vector<double>> embed_images(Client &c,
                                                     const std::vector<std::string> &pngs) {
    std::vector<std::string> b64;
    for (const auto &p : pngs)
        b64.push_back(base64_encode(p));
    json r = c.call(Endpoint::embed_image, {{"images_png_b64", b64}});
    auto out = r["vectors"].get<std::vector<std::vector<double>>>();
    if (out.size() != pngs.size())
        throw SchemaError("embed/image response", "vectors", "one vector per image expected");
    return out;
}

inline metrics::TokenEmbedding embed_tokens(Client &c, const std::string &text) {
    json r = c.call(Endpoint::embed_tokens, {{"text", text}});
    metrics::TokenEmbedding te;
    te.tokens = r["tokens"].get<std::vector<std::string>>();
    te.vectors = r["vectors"].get<std::vector<std::vector<double>>>();
    if (te.tokens.size() != te.vectors.size())
        throw SchemaError("embed/tokens response", "vectors", "one vector per token expected");
    return te;
}

inline std::string vqa_generate(Client &c, const std::string &png, const std::string &input_text,
                                int max_tokens) {
    json r = c.call(Endpoint::vqa_generate, {{"image_png_b64", base64_encode(png)},
                                             {"input_text", input_text},
                                             {"max_tokens", max_tokens}});
    return r["text"].get<std::string>();
}

inline std::string inpaint(Client &c, const std::string &png, const std::string &mask_png) {
    json r = c.call(Endpoint::inpaint,
                    {{"image_png_b64", base64_encode(png)}, {"mask_png_b64", base64_encode(mask_png)}});
    return base64_decode(r["image_png_b64"].get<std::string>());
}

inline std::string llm_complete(Client &c, const std::string &prompt, int max_tokens,
                                double temperature) {
    json r = c.call(Endpoint::llm_complete,
                    {{"prompt", prompt}, {"max_tokens", max_tokens}, {"temperature", temperature}});
    return r["text"].get<std::string>();
}

} // namespace vqaadv::backend
