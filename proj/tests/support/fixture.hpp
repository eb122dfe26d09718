#pragma once

// Shared test fixture: a small mixed corpus and a deterministic mock script
// covering every pipeline stage for every sentence. Rules key on an
// instruction fragment plus the sentence text, so responses are stable
// across ablations and concurrency levels.

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "emobi/corpus.hpp"
#include "emobi/gateway.hpp"
#include "emobi/types.hpp"

namespace emobi::testsupport {

inline std::filesystem::path repo_dir() { return std::filesystem::path(EMOBI_REPO_DIR); }

inline std::filesystem::path template_dir() { return repo_dir() / "templates" / "default"; }

inline std::filesystem::path fixture_csv() {
    return repo_dir() / "tests" / "fixtures" / "sentences.csv";
}

inline DatasetSpec fixture_spec() {
    DatasetSpec spec;
    spec.name = Dataset::HYPO;
    spec.path = fixture_csv();
    spec.format.id_column = "id";
    return spec;
}

inline std::vector<SentenceRecord> fixture_records() { return load_dataset(fixture_spec()); }

// Instruction fragments that identify each stage's prompt.
inline constexpr const char* kEmotionFrag =
    "Please analyze the emotion of the following sentence.";
inline constexpr const char* kDomainFrag = "identify the source domain and target domain";
inline constexpr const char* kCrossHypFrag = "uses hyperbole";
inline constexpr const char* kCrossMetFrag = "uses metaphor";
inline constexpr const char* kFinalHypFrag = "is a hyperbole sentence";
inline constexpr const char* kFinalMetFrag = "is a metaphor sentence";
inline constexpr const char* kVerifyFrag = "Re-evaluate";
inline constexpr const char* kBaselineFrag = "Please identify the hyperbole label";
inline constexpr const char* kCotFrag = "Let's think step by step";

// Scripted predictions: gold labels with a few deliberate flips so the
// fixture metrics are not degenerate.
inline int planned_hyperbole_pred(const SentenceRecord& r) {
    const bool flip = r.id == "3" || r.id == "14";
    return flip ? 1 - r.hyperbole_gold : r.hyperbole_gold;
}

inline int planned_metaphor_pred(const SentenceRecord& r) {
    const bool flip = r.id == "5" || r.id == "18";
    return flip ? 1 - r.metaphor_gold : r.metaphor_gold;
}

inline std::string emotion_text(const SentenceRecord& r) {
    return "The sentence conveys an intense emotional tone (E" + r.id + ").";
}

inline std::string domain_text(const SentenceRecord& r) {
    return "Source domain: source-" + r.id + "\nTarget domain: target-" + r.id +
           "\nConnection: connection-" + r.id + ".";
}

inline std::string cross_text(Device device, const SentenceRecord& r) {
    if (device == Device::metaphor) {
        return "Metaphor analysis M" + r.id + ": the sentence maps source-" + r.id +
               " onto target-" + r.id + ".";
    }
    return "Hyperbole analysis H" + r.id + ": the sentence amplifies target-" + r.id +
           " beyond the literal.";
}

inline std::string final_text(Device device, const SentenceRecord& r) {
    const int label =
        device == Device::hyperbole ? planned_hyperbole_pred(r) : planned_metaphor_pred(r);
    const std::string tag = device == Device::hyperbole ? "FH" : "FM";
    return "Final reasoning " + tag + r.id + ". Label: " + (label == 1 ? "yes" : "no");
}

inline std::string joint_text(const SentenceRecord& r) {
    return std::string("Considering both devices. Hyperbole: ") +
           (planned_hyperbole_pred(r) == 1 ? "yes" : "no") +
           "\nMetaphor: " + (planned_metaphor_pred(r) == 1 ? "yes" : "no");
}

// Confirm-on-re-evaluation rules come first; they key on the verification
// prompt's quoted prior label and never collide with other stages.
inline std::vector<MockRule> verification_confirm_rules() {
    return {
        {{kVerifyFrag, "previously labeled \"yes\""},
         "Confirmed on re-evaluation. Label: yes"},
        {{kVerifyFrag, "previously labeled \"no\""}, "Confirmed on re-evaluation. Label: no"},
    };
}

inline std::vector<MockRule> fixture_script(const std::vector<SentenceRecord>& records) {
    std::vector<MockRule> script = verification_confirm_rules();
    for (const auto& r : records) {
        script.push_back({{kEmotionFrag, r.text}, emotion_text(r)});
        script.push_back({{kDomainFrag, r.text}, domain_text(r)});
        script.push_back({{kCrossMetFrag, r.text}, cross_text(Device::metaphor, r)});
        script.push_back({{kCrossHypFrag, r.text}, cross_text(Device::hyperbole, r)});
        script.push_back({{kFinalHypFrag, r.text}, final_text(Device::hyperbole, r)});
        script.push_back({{kFinalMetFrag, r.text}, final_text(Device::metaphor, r)});
        script.push_back({{kBaselineFrag, r.text}, joint_text(r)});
        script.push_back({{kCotFrag, r.text}, "Step one, step two. " + joint_text(r)});
    }
    return script;
}

inline ProviderConfig mock_provider(std::vector<MockRule> script) {
    ProviderConfig cfg;
    cfg.kind = ProviderKind::scripted_mock;
    cfg.script = std::move(script);
    cfg.retry.max_attempts = 3;
    cfg.retry.backoff_ms = {0};
    return cfg;
}

// Unique scratch directory, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 gen(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() /
                ("emobi-" + tag + "-" + std::to_string(gen()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
};

}  // namespace emobi::testsupport
