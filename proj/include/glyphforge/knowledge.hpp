#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace glyphforge {

enum class PromptSource { llm, fixture, manual };

const char* prompt_source_name(PromptSource s);

// Subject and surrounding text descriptions for one character.
struct PromptPair {
    std::string subject_prompt;
    std::string surrounding_prompt;
    PromptSource source = PromptSource::llm;

    bool operator==(const PromptPair& o) const {
        return subject_prompt == o.subject_prompt && surrounding_prompt == o.surrounding_prompt;
    }
};

// System text plus a question format with exactly one <CONCEPT> placeholder.
struct QueryTemplate {
    std::string system_text;
    std::string question_format;

    static QueryTemplate standard();
    uint64_t content_hash() const;
};

inline const std::string kConceptPlaceholder = "<CONCEPT>";

std::string build_query(const std::string& character, const QueryTemplate& tmpl);

// Extracts the first balanced JSON object from the text (tolerating prose
// around it) and reads the "subject prompt" / "surrounding prompt" keys.
PromptPair parse_response(const std::string& text);

std::string serialize_prompts(const PromptPair& p);

class LLMBackend {
public:
    virtual ~LLMBackend() = default;
    virtual std::string name() const = 0;
    virtual bool offline() const { return false; }
    virtual std::string complete(const std::string& system_text, const std::string& user_text) = 0;
};

// Canned responses keyed by concept; ships with built-in entries and can load
// more from a JSON file (concept -> raw response string). Unknown concepts
// get a deterministic synthesized response so offline runs never stall.
class FixtureLLMBackend : public LLMBackend {
public:
    FixtureLLMBackend();
    explicit FixtureLLMBackend(const std::string& fixture_file);

    void add_fixture(const std::string& concept_key, const std::string& response);

    std::string name() const override { return "fixture"; }
    bool offline() const override { return true; }
    std::string complete(const std::string& system_text, const std::string& user_text) override;

private:
    std::map<std::string, std::string> table_;
};

// JSON-over-HTTP adapter (GLYPHFORGE_LLM_URL / GLYPHFORGE_LLM_KEY).
class HttpLLMBackend : public LLMBackend {
public:
    HttpLLMBackend(std::string url, std::string api_key, int timeout_ms = 30000);
    static std::unique_ptr<HttpLLMBackend> from_env();

    std::string name() const override { return "llm-http"; }
    std::string complete(const std::string& system_text, const std::string& user_text) override;

private:
    std::string url_;
    std::string api_key_;
    int timeout_ms_;
};

// Thread-safe response cache keyed by (character, template hash).
class PromptCache {
public:
    std::optional<PromptPair> get(const std::string& character, uint64_t template_hash);
    void put(const std::string& character, uint64_t template_hash, const PromptPair& p);

private:
    std::mutex mu_;
    std::map<std::pair<std::string, uint64_t>, PromptPair> map_;
};

// Query -> validate -> retry with a repair instruction (3 attempts total).
PromptPair acquire_prompts(const std::string& character, LLMBackend& backend,
                           const QueryTemplate& tmpl, PromptCache* cache = nullptr);

}  // namespace glyphforge
