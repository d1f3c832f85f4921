#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "vqaadv/backend/stub.hpp"
#include "vqaadv/imageattack.hpp"

using namespace vqaadv;
using namespace vqaadv::imageattack;
namespace fs = std::filesystem;

namespace {

const VocabularyMapping &mapping() {
    static const auto m = VocabularyMapping::load(std::string(VQAADV_DATA_DIR) + "/coco_vocab_mapping.json");
    return m;
}

CategorySet to_set(std::initializer_list<const char *> xs) { return CategorySet(xs.begin(), xs.end()); }

ObjectInstance inst(const std::string &cat, double x, double y, double w, double h) {
    return ObjectInstance{cat, {x, y, w, h}, w * h};
}

ImageEntry image_100(std::vector<ObjectInstance> instances) {
    return ImageEntry{1, "1.png", 100, 100, std::move(instances)};
}

backend::ClientOptions no_sleep() {
    backend::ClientOptions o;
    o.sleep = [](std::chrono::milliseconds) {};
    return o;
}

std::string gradient_png(int w, int h) {
    image::RgbImage img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            img.at(x, y)[0] = static_cast<std::uint8_t>(x * 255 / w);
            img.at(x, y)[1] = static_cast<std::uint8_t>(y * 255 / h);
            img.at(x, y)[2] = 40;
        }
    return image::encode_png(img);
}

} // namespace

TEST(VocabularyMapping, VehicleSynonymsMapToCar) {
    for (const char *t : {"van", "taxi", "trunk", "truck", "SUV"})
        EXPECT_EQ(map_to_coco(std::string("the ") + t + " is parked", mapping()), to_set({"car"})) << t;
}

TEST(VocabularyMapping, TableAndDeskMapToDiningTable) {
    EXPECT_EQ(map_to_coco("a desk and chair", mapping()), to_set({"dining table", "chair"}));
    EXPECT_EQ(map_to_coco("the table", mapping()), to_set({"dining table"}));
}

TEST(VocabularyMapping, UnknownTermsMapToNothing) {
    EXPECT_TRUE(map_to_coco("nothing relevant here", mapping()).empty());
    EXPECT_TRUE(map_to_coco("", mapping()).empty());
}

TEST(VocabularyMapping, LongestMatchWins) {
    EXPECT_EQ(map_to_coco("a teddy bear on the bed", mapping()), to_set({"teddy bear", "bed"}));
    EXPECT_EQ(map_to_coco("a hot dog", mapping()), to_set({"hot dog"}));
}

TEST(VocabularyMapping, PluralsAndPronouns) {
    EXPECT_EQ(map_to_coco("two vans and some dining tables", mapping()), to_set({"car", "dining table"}));
    EXPECT_EQ(map_to_coco("she is holding it", mapping()), to_set({"person"}));
    EXPECT_EQ(map_to_coco("the people near the benches", mapping()), to_set({"person", "bench"}));
}

TEST(VocabularyMapping, EveryCocoCategoryMapsToItselfExceptTruck) {
    EXPECT_EQ(map_to_coco("truck", mapping()), to_set({"car"}));
    for (auto c : kCocoCategories)
        if (std::string_view(c) != "truck")
            EXPECT_EQ(map_to_coco(std::string(c), mapping()), CategorySet{std::string(c)}) << c;
}

TEST(VocabularyMapping, RejectsNonCocoValues) {
    EXPECT_THROW(VocabularyMapping::from_json(json{{"entries", {{"car", "automobile"}}}}), ConfigError);
}

TEST(ObjectSets, DiningScene) {
    auto c = candidate_set(to_set({"dining table", "person"}), to_set({"dining table", "person", "cup"}),
                           to_set({"person"}));
    EXPECT_EQ(c, to_set({"dining table"}));
}

TEST(ObjectSets, ExplanationInsideQaGivesNothing) {
    EXPECT_TRUE(candidate_set(to_set({"person"}), to_set({"person", "cup"}), to_set({"person", "cup"})).empty());
}

TEST(ObjectSets, EmptyQaGivesIntersection) {
    EXPECT_EQ(candidate_set(to_set({"dog", "car"}), to_set({"dog", "cup"}), {}), to_set({"dog"}));
}

TEST(ObjectSets, CandidateSetProperties) {
    oracle::Rng rng(77);
    auto random_set = [&] {
        CategorySet s;
        std::size_t n = rng.below(12);
        for (std::size_t i = 0; i < n; ++i)
            s.insert(std::string(kCocoCategories[rng.below(16)]));
        return s;
    };
    for (int trial = 0; trial < 10000; ++trial) {
        CategorySet e = random_set(), i = random_set(), qa = random_set();
        CategorySet got = candidate_set(e, i, qa);
        CategorySet diff, expected;
        std::set_difference(i.begin(), i.end(), qa.begin(), qa.end(), std::inserter(diff, diff.end()));
        std::set_intersection(e.begin(), e.end(), diff.begin(), diff.end(), std::inserter(expected, expected.end()));
        ASSERT_EQ(got, expected);
        for (const auto &c : got) {
            ASSERT_FALSE(qa.count(c));
            ASSERT_TRUE(e.count(c) && i.count(c));
        }
    }
}

TEST(ObjectSets, ExtractFromSample) {
    Sample s{"s", 1, "1", "what is the woman holding?", {"a cup"}, {"x"}, Split::val};
    auto img = image_100({inst("person", 0, 0, 10, 10), inst("cup", 5, 5, 4, 4), inst("dining table", 20, 20, 50, 30)});
    auto sets = extract_object_sets(s, "she is sitting at a table with a cup", img, mapping());
    EXPECT_EQ(sets.s_image, to_set({"person", "cup", "dining table"}));
    EXPECT_EQ(sets.s_qa, to_set({"person", "cup"}));
    EXPECT_EQ(sets.s_explanation, to_set({"person", "dining table", "cup"}));
    EXPECT_EQ(sets.s_candidate, to_set({"dining table"}));
}

TEST(ObjectSets, MissingImageIsError) {
    Sample s{"s", 42, "42", "q?", {"a"}, {"x"}, Split::val};
    AnnotationIndex idx;
    EXPECT_THROW(extract_object_sets(s, "x", idx, mapping()), Error);
}

TEST(SelectTarget, MostInstancesWins) {
    auto img = image_100({inst("car", 0, 0, 1, 1), inst("car", 2, 2, 1, 1), inst("car", 4, 4, 1, 1),
                          inst("dog", 0, 0, 50, 50)});
    EXPECT_EQ(select_target(to_set({"car", "dog"}), img), "car");
}

TEST(SelectTarget, TieBrokenByArea) {
    auto img = image_100({inst("car", 0, 0, 2, 2), inst("car", 2, 2, 2, 2), inst("dog", 0, 0, 5, 5),
                          inst("dog", 10, 10, 1, 1)});
    EXPECT_EQ(select_target(to_set({"car", "dog"}), img), "dog");
}

TEST(SelectTarget, TieBrokenByName) {
    auto img = image_100({inst("car", 0, 0, 2, 2), inst("bus", 5, 5, 2, 2)});
    EXPECT_EQ(select_target(to_set({"car", "bus"}), img), "bus");
}

TEST(SelectTarget, EmptyCandidatesGiveNone) {
    EXPECT_FALSE(select_target(CategorySet{}, image_100({inst("car", 0, 0, 2, 2)})));
}

TEST(SelectTarget, InvariantUnderEnumerationOrder) {
    oracle::Rng rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<ObjectInstance> instances;
        std::size_t n = 1 + rng.below(10);
        for (std::size_t i = 0; i < n; ++i)
            instances.push_back(inst(std::string(kCocoCategories[rng.below(5)]), 0, 0,
                                     static_cast<double>(1 + rng.below(3)), 1));
        auto a = image_100(instances);
        std::vector<ObjectInstance> shuffled = instances;
        std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937(static_cast<unsigned>(trial)));
        auto b = image_100(shuffled);
        CategorySet cands;
        for (std::size_t i = 0; i < 5; ++i)
            if (rng.below(2))
                cands.insert(std::string(kCocoCategories[i]));
        EXPECT_EQ(select_target(cands, a), select_target(cands, b));
    }
}

TEST(BuildMask, HandComputedAreas) {
    auto img = image_100({inst("car", 10, 10, 20, 20)});
    EXPECT_EQ(build_mask(img, "car", 0).area(), 400u);
    EXPECT_EQ(build_mask(img, "car", 8).area(), 1296u);
    auto corner = image_100({inst("car", 0, 0, 10, 10)});
    EXPECT_EQ(build_mask(corner, "car", 8).area(), 324u);
}

TEST(BuildMask, UnionOfOverlappingBoxes) {
    auto img = image_100({inst("car", 0, 0, 10, 10), inst("car", 5, 5, 10, 10), inst("dog", 50, 50, 10, 10)});
    EXPECT_EQ(build_mask(img, "car", 0).area(), 175u);
}

TEST(BuildMask, DegenerateBoxesIgnored) {
    auto img = image_100({inst("car", 10, 10, 0, 5), inst("car", 10, 10, 2, 2)});
    EXPECT_EQ(build_mask(img, "car", 0).area(), 4u);
    auto only_degenerate = image_100({inst("car", 10, 10, 0, 5)});
    EXPECT_THROW(build_mask(only_degenerate, "car", 0), Error);
}

TEST(RemovalMask, RunLengthRoundTrip) {
    oracle::Rng rng(123);
    for (int trial = 0; trial < 1000; ++trial) {
        int w = static_cast<int>(1 + rng.below(40)), h = static_cast<int>(1 + rng.below(40));
        std::vector<std::uint8_t> raster(static_cast<std::size_t>(w) * h);
        double density = rng.unit();
        for (auto &px : raster)
            px = rng.unit() < density ? 1 : 0;
        RemovalMask m = encode_mask(w, h, raster);
        ASSERT_EQ(decode_mask(m), raster);
        ASSERT_EQ(m.area(), static_cast<std::size_t>(std::count(raster.begin(), raster.end(), 1)));
    }
}

TEST(RemovalMask, PngExportIsOneBitAndLossless) {
    auto img = image_100({inst("car", 10, 10, 20, 20)});
    RemovalMask m = build_mask(img, "car", 3);
    std::string png = mask_to_png(m);
    EXPECT_EQ(static_cast<unsigned char>(png[24]), 1u); // IHDR bit depth
    int w = 0, h = 0;
    EXPECT_EQ(image::decode_bilevel_png(png, w, h), decode_mask(m));
}

TEST(InpaintAndVerify, IdentityInpainterGivesUnitSimilarity) {
    backend::StubBackend stub(7, {}, backend::StubOptions{false, true});
    backend::Client client(stub, nullptr, no_sleep());
    std::string png = gradient_png(100, 100);
    auto out = inpaint_and_verify(png, build_mask(image_100({inst("car", 10, 10, 20, 20)}), "car", 0), client);
    EXPECT_EQ(out.similarity, 1.0);
    EXPECT_FALSE(out.low_similarity);
    EXPECT_EQ(out.edited_image_ref, sha256_hex(png));
}

TEST(InpaintAndVerify, ReproducibleAndStoredUnderContentHash) {
    fs::path dir = fs::temp_directory_path() / ("vqaadv-img-" + std::to_string(std::random_device{}()));
    std::string png = gradient_png(100, 100);
    auto mask = build_mask(image_100({inst("car", 10, 10, 40, 40)}), "car", 8);
    double first = 0;
    for (int run = 0; run < 2; ++run) {
        backend::StubBackend stub(7);
        backend::Client client(stub, nullptr, no_sleep());
        auto out = inpaint_and_verify(png, mask, client, 0.5, dir);
        EXPECT_LT(out.similarity, 1.0);
        if (run == 0)
            first = out.similarity;
        else
            EXPECT_EQ(out.similarity, first);
        EXPECT_TRUE(fs::exists(dir / (out.edited_image_ref + ".png")));
        EXPECT_EQ(sha256_file((dir / (out.edited_image_ref + ".png")).string()), out.edited_image_ref);
    }
    fs::remove_all(dir);
}

TEST(InpaintAndVerify, LowSimilarityFlaggedNotDropped) {
    backend::StubBackend stub(7);
    backend::Client client(stub, nullptr, no_sleep());
    auto out = inpaint_and_verify(gradient_png(100, 100),
                                  build_mask(image_100({inst("car", 0, 0, 100, 100)}), "car", 0), client, 0.999);
    EXPECT_TRUE(out.low_similarity);
    EXPECT_FALSE(out.edited_png.empty());
}

TEST(RunImageAttack, NoRemovableObjectRecorded) {
    backend::StubBackend stub(7);
    backend::Client client(stub, nullptr, no_sleep());
    Sample s{"s", 1, "1", "is the dog wet?", {"yes"}, {"x"}, Split::val};
    auto img = image_100({inst("dog", 10, 10, 20, 20)});
    ImageVictim victim = [](const std::string &) {
        return VictimOutput{"", "yes because the dog is in the water", "yes", "the dog is in the water", false};
    };
    auto r = run_image_attack(s, {}, {client, victim, &img, mapping(), gradient_png(100, 100), std::nullopt});
    EXPECT_EQ(r.status, Status::no_removable_object);
    EXPECT_FALSE(r.adversarial);
}

TEST(RunImageAttack, ScriptedDogInWaterFlip) {
    std::string png = gradient_png(100, 100);
    auto img = image_100({inst("dog", 30, 40, 20, 15), inst("person", 70, 10, 10, 30)});
    Sample s{"dog-water", 1, "1", "Is this the ocean?", {"no"}, {"x"}, Split::val};
    backend::StubBackend stub(7);
    backend::Client client(stub, nullptr, no_sleep());
    ImageVictim victim = [&](const std::string &bytes) {
        std::string raw = bytes == png ? "no because there is a dog in the water" : "yes because there are waves";
        auto p = knowledge::parse_generation(raw);
        return VictimOutput{"", raw, p.answer, p.explanation, p.missing_because};
    };
    auto r = run_image_attack(s, {}, {client, victim, &img, mapping(), png, std::nullopt});
    ASSERT_EQ(r.status, Status::attacked) << r.error;
    EXPECT_EQ(r.object_sets.s_target, "dog");
    EXPECT_EQ(r.mask->area(), 36u * 31u);
    EXPECT_EQ(r.original.answer, "no");
    EXPECT_EQ(r.adversarial->answer, "yes");
    EXPECT_FALSE(r.object_sets.s_qa.count("dog"));
}

TEST(RunImageAttack, MissingAnnotationsFailSample) {
    backend::StubBackend stub(7);
    backend::Client client(stub, nullptr, no_sleep());
    Sample s{"s", 9, "9", "q?", {"a"}, {"x"}, Split::val};
    ImageVictim victim = [](const std::string &) { return VictimOutput{}; };
    auto r = run_image_attack(s, {}, {client, victim, nullptr, mapping(), "", std::nullopt});
    EXPECT_EQ(r.status, Status::failed);
}
