#include "glyphforge/knowledge.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>

#include <json.hpp>

#include "glyphforge/core/errors.hpp"
#include "glyphforge/core/hash.hpp"

namespace glyphforge {

namespace {

constexpr int kMaxAttempts = 3;

const char* kRepairInstruction =
    " Your previous reply was not valid. Respond with exactly one JSON object containing the keys "
    "\"subject prompt\" and \"surrounding prompt\" and nothing else.";

const char* kSystemText =
    "Suppose you are a creative and active explainer, dedicated to helping people understand "
    "abstract concepts and concrete them. Your task is to identify and elucidate the "
    "representative tangible objects within these abstract concepts, helping the audience better "
    "connect abstract thinking with real-world entities. All questions should follow a "
    "standardized format, such as: \"Please list the representative tangible objects in/of "
    "<CONCEPT>, along with the appropriate artistic font style.\" Your response must adhere to a "
    "strict JSON format, specifically: {\"subject prompt\": \"representative tangible object that "
    "can express the intrinsic semantic of input <CONCEPT>\", \"surrounding prompt\": "
    "\"appropriate artistic font style or texture that can enrich <CONCEPT>.\"} This format "
    "ensures clarity and consistency in responses, making the information easy to parse and "
    "understand. For example, suppose the question is: \"Please list the representative category "
    "or object name in/of 'cat', including in real-life, artist works, and film works, and select "
    "an appropriate artistic font style.\" Your response should be: {\"subject prompt\": \"cake "
    "and frosting, sprinkles, layers, with features like sweet, colorful, decadent, "
    "multi-tiered.\",\"surrounding prompt\": \"texture design is frosting, sprinkles, layers, "
    "with creamy, glossy, textured, and delightful details.\"}";

const char* kQuestionFormat =
    "Please list the representative tangible objects in/of <CONCEPT>, along with the appropriate "
    "artistic font style.";

// Tokens that never count as the required content word.
bool is_stopword(const std::string& w) {
    static const std::array<const char*, 26> kStop = {
        "a",    "an",  "the",  "of",   "in",   "on",  "at",   "to",  "with",
        "and",  "or",  "for",  "by",   "is",   "are", "that", "this", "its",
        "it",   "as",  "such", "like", "very", "more", "most", "be"};
    return std::find(kStop.begin(), kStop.end(), w) != kStop.end();
}

bool has_content_word(const std::string& text) {
    std::string token;
    auto flush = [&]() {
        bool ok = token.size() >= 2 && !is_stopword(token);
        token.clear();
        return ok;
    };
    for (char c : text) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!token.empty() && flush()) {
            return true;
        }
    }
    return !token.empty() && flush();
}

// First balanced {...} object, string- and escape-aware.
std::optional<std::string> extract_json_object(const std::string& text) {
    size_t start = text.find('{');
    while (start != std::string::npos) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (size_t i = start; i < text.size(); i++) {
            char c = text[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                depth++;
            } else if (c == '}') {
                depth--;
                if (depth == 0) return text.substr(start, i - start + 1);
            }
        }
        start = text.find('{', start + 1);
    }
    return std::nullopt;
}

}  // namespace

const char* prompt_source_name(PromptSource s) {
    switch (s) {
        case PromptSource::llm: return "llm";
        case PromptSource::fixture: return "fixture";
        case PromptSource::manual: return "manual";
    }
    return "?";
}

QueryTemplate QueryTemplate::standard() {
    return QueryTemplate{kSystemText, kQuestionFormat};
}

uint64_t QueryTemplate::content_hash() const {
    return fnv1a64(system_text + "\x1f" + question_format);
}

std::string build_query(const std::string& character, const QueryTemplate& tmpl) {
    if (character.empty()) throw InvalidInput("build_query: empty character");
    size_t first = tmpl.question_format.find(kConceptPlaceholder);
    if (first == std::string::npos) {
        throw TemplateError("question format has no " + kConceptPlaceholder + " placeholder");
    }
    if (tmpl.question_format.find(kConceptPlaceholder, first + 1) != std::string::npos) {
        throw TemplateError("question format has more than one placeholder");
    }
    std::string q = tmpl.question_format;
    q.replace(first, kConceptPlaceholder.size(), character);
    return q;
}

PromptPair parse_response(const std::string& text) {
    std::optional<std::string> obj = extract_json_object(text);
    if (!obj) throw MalformedResponse("no JSON object in response");

    nlohmann::json j = nlohmann::json::parse(*obj, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw MalformedResponse("response is not valid JSON");
    }
    if (!j.contains("subject prompt") || !j.contains("surrounding prompt")) {
        throw MalformedResponse("response is missing a prompt key");
    }
    if (!j["subject prompt"].is_string() || !j["surrounding prompt"].is_string()) {
        throw MalformedResponse("prompt values must be strings");
    }

    PromptPair p;
    p.subject_prompt = j["subject prompt"].get<std::string>();
    p.surrounding_prompt = j["surrounding prompt"].get<std::string>();
    if (p.subject_prompt.empty() || p.surrounding_prompt.empty()) {
        throw MalformedResponse("empty prompt value");
    }
    if (!has_content_word(p.subject_prompt)) {
        throw MalformedResponse("subject prompt names no tangible object");
    }
    return p;
}

std::string serialize_prompts(const PromptPair& p) {
    nlohmann::ordered_json j;
    j["subject prompt"] = p.subject_prompt;
    j["surrounding prompt"] = p.surrounding_prompt;
    return j.dump();
}

FixtureLLMBackend::FixtureLLMBackend() {
    add_fixture("rose",
                "{\"subject prompt\": \"a blooming red rose flower\", \"surrounding prompt\": "
                "\"brown vignette, leaf, slender branch, thorns in a romantic atmosphere\"}");
    add_fixture("plum",
                "{\"subject prompt\": \"round plum, juicy fruit and vibrant blossom with features "
                "such as juicy, round, vibrant, fragrant and delicate.\", \"surrounding prompt\": "
                "\"colorful blossom, green leaves, petals, water droplets, velvety skin texture "
                "and intricate floral motifs.\"}");
}

FixtureLLMBackend::FixtureLLMBackend(const std::string& fixture_file) : FixtureLLMBackend() {
    std::ifstream f(fixture_file);
    if (!f) throw BackendUnavailable("cannot open LLM fixture file: " + fixture_file);
    nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw BackendUnavailable("LLM fixture file is not a JSON object: " + fixture_file);
    }
    for (auto& [k, v] : j.items()) {
        if (v.is_string()) add_fixture(k, v.get<std::string>());
    }
}

void FixtureLLMBackend::add_fixture(const std::string& concept_key, const std::string& response) {
    table_[concept_key] = response;
}

std::string FixtureLLMBackend::complete(const std::string& /*system_text*/,
                                        const std::string& user_text) {
    // The fixture key is the concept embedded in the question; match the
    // longest known concept so lookups stay table-driven.
    std::string best;
    for (const auto& [concept_key, response] : table_) {
        if (user_text.find(concept_key) != std::string::npos && concept_key.size() > best.size()) {
            best = concept_key;
        }
    }
    if (!best.empty()) return table_.at(best);

    // Synthesized deterministic fallback for unseeded concepts.
    std::string concept_key = user_text;
    const std::string prefix = "Please list the representative tangible objects in/of ";
    if (concept_key.rfind(prefix, 0) == 0) {
        concept_key = concept_key.substr(prefix.size());
        size_t cut = concept_key.find(", along with");
        if (cut != std::string::npos) concept_key = concept_key.substr(0, cut);
    }
    nlohmann::ordered_json j;
    j["subject prompt"] = "a detailed depiction of " + concept_key;
    j["surrounding prompt"] = "decorative strokes and ornaments evoking " + concept_key;
    return j.dump();
}

std::optional<PromptPair> PromptCache::get(const std::string& character, uint64_t template_hash) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = map_.find({character, template_hash});
    if (it == map_.end()) return std::nullopt;
    return it->second;
}

void PromptCache::put(const std::string& character, uint64_t template_hash, const PromptPair& p) {
    std::lock_guard<std::mutex> lock(mu_);
    map_.emplace(std::make_pair(character, template_hash), p);
}

PromptPair acquire_prompts(const std::string& character, LLMBackend& backend,
                           const QueryTemplate& tmpl, PromptCache* cache) {
    const uint64_t thash = tmpl.content_hash();
    if (cache != nullptr) {
        if (auto hit = cache->get(character, thash)) return *hit;
    }

    const std::string question = build_query(character, tmpl);
    std::string last_error;
    for (int attempt = 0; attempt < kMaxAttempts; attempt++) {
        std::string user_text = question;
        if (attempt > 0) user_text += kRepairInstruction;
        std::string raw = backend.complete(tmpl.system_text, user_text);
        try {
            PromptPair p = parse_response(raw);
            p.source = backend.offline() ? PromptSource::fixture : PromptSource::llm;
            if (cache != nullptr) cache->put(character, thash, p);
            return p;
        } catch (const MalformedResponse& e) {
            last_error = e.what();
        }
    }
    throw MalformedResponse("no valid response after " + std::to_string(kMaxAttempts) +
                            " attempts (" + last_error + ")");
}

}  // namespace glyphforge
