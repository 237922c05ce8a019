#include <cstring>

#include <httplib.h>
#include <json.hpp>

#include "glyphforge/backends.hpp"
#include "glyphforge/core/image_io.hpp"
#include "glyphforge/knowledge.hpp"
#include "glyphforge/region.hpp"

// HTTP adapter shells for external model services. Wire formats:
//   LLM       POST <url>         {"system_text","user_text"} -> raw string body
//   detector  POST <url>         {"image": b64 png, "text", "box_threshold"}
//                                -> [{"box":[x0,y0,x1,y1],"score","phrase"}]
//   denoiser  POST <url>/shape   {"h","w"} -> {"h","w","c"}
//             POST <url>/encode  {"image": b64 f32, "shape":[h,w,c]} -> same keys
//             POST <url>/decode  likewise
//             POST <url>/predict {"latent","shape","t","cond_id","control_png",
//                                 "cs"} -> {"eps","shape"}
// Latents travel as base64 row-major float32 (little-endian).

namespace glyphforge {

namespace {

std::string tensor_to_b64(const Tensor& t) {
    return base64_encode(reinterpret_cast<const uint8_t*>(t.v.data()), t.v.size() * sizeof(float));
}

Tensor b64_to_tensor(const std::string& b64, int h, int w, int c) {
    std::vector<uint8_t> bytes = base64_decode(b64);
    Tensor t(h, w, c);
    if (bytes.size() != t.v.size() * sizeof(float)) {
        throw BackendUnavailable("remote payload size does not match declared shape");
    }
    std::memcpy(t.v.data(), bytes.data(), bytes.size());
    return t;
}

nlohmann::json post_json(const std::string& url, const std::string& path, const nlohmann::json& req,
                         int timeout_ms, const std::string& bearer = "") {
    httplib::Client cli(url);
    cli.set_connection_timeout(0, timeout_ms * 1000);
    cli.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    httplib::Headers headers;
    if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);
    auto res = cli.Post(path, headers, req.dump(), "application/json");
    if (!res) {
        throw BackendUnavailable("cannot reach " + url + path + " (" +
                                 httplib::to_string(res.error()) + ")");
    }
    if (res->status != 200) {
        throw BackendUnavailable(url + path + " returned HTTP " + std::to_string(res->status));
    }
    nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded()) throw BackendUnavailable("non-JSON reply from " + url + path);
    return j;
}

}  // namespace

HttpLLMBackend::HttpLLMBackend(std::string url, std::string api_key, int timeout_ms)
    : url_(std::move(url)), api_key_(std::move(api_key)), timeout_ms_(timeout_ms) {}

std::unique_ptr<HttpLLMBackend> HttpLLMBackend::from_env() {
    const char* url = std::getenv("GLYPHFORGE_LLM_URL");
    if (url == nullptr || *url == '\0') {
        throw BackendUnavailable("GLYPHFORGE_LLM_URL is not set");
    }
    const char* key = std::getenv("GLYPHFORGE_LLM_KEY");
    return std::make_unique<HttpLLMBackend>(url, key ? key : "");
}

std::string HttpLLMBackend::complete(const std::string& system_text, const std::string& user_text) {
    httplib::Client cli(url_);
    cli.set_connection_timeout(0, timeout_ms_ * 1000);
    cli.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    nlohmann::json req{{"system_text", system_text}, {"user_text", user_text}};
    auto res = cli.Post("/", headers, req.dump(), "application/json");
    if (!res) {
        throw BackendUnavailable("cannot reach LLM endpoint " + url_ + " (" +
                                 httplib::to_string(res.error()) + ")");
    }
    if (res->status != 200) {
        throw BackendUnavailable("LLM endpoint returned HTTP " + std::to_string(res->status));
    }
    return res->body;
}

HttpDetectorBackend::HttpDetectorBackend(std::string url, int timeout_ms)
    : url_(std::move(url)), timeout_ms_(timeout_ms) {}

std::vector<DetectionBox> HttpDetectorBackend::detect(const GlyphImage& image,
                                                      const std::string& prompt,
                                                      float box_threshold) {
    nlohmann::json req{{"image", base64_encode(encode_gray_png(image.pixels))},
                       {"text", prompt},
                       {"box_threshold", box_threshold}};
    nlohmann::json j = post_json(url_, "/", req, timeout_ms_);
    if (!j.is_array()) throw BackendUnavailable("detector reply is not a list");
    std::vector<DetectionBox> boxes;
    for (auto& e : j) {
        DetectionBox b;
        b.x0 = e.at("box").at(0).get<float>();
        b.y0 = e.at("box").at(1).get<float>();
        b.x1 = e.at("box").at(2).get<float>();
        b.y1 = e.at("box").at(3).get<float>();
        b.confidence = e.at("score").get<float>();
        b.phrase = e.value("phrase", "");
        boxes.push_back(b);
    }
    return boxes;
}

RemoteDenoiserBackend::RemoteDenoiserBackend(std::string url, int timeout_ms)
    : url_(std::move(url)), timeout_ms_(timeout_ms) {}

LatentShape RemoteDenoiserBackend::latent_shape(int image_h, int image_w) const {
    nlohmann::json j = post_json(url_, "/shape", {{"h", image_h}, {"w", image_w}}, timeout_ms_);
    return {j.at("h").get<int>(), j.at("w").get<int>(), j.at("c").get<int>()};
}

Tensor RemoteDenoiserBackend::encode(const Tensor& image) const {
    nlohmann::json req{{"image", tensor_to_b64(image)},
                       {"shape", {image.h, image.w, image.c}}};
    nlohmann::json j = post_json(url_, "/encode", req, timeout_ms_);
    auto s = j.at("shape");
    return b64_to_tensor(j.at("latent").get<std::string>(), s.at(0), s.at(1), s.at(2));
}

Tensor RemoteDenoiserBackend::decode(const Tensor& latent) const {
    nlohmann::json req{{"latent", tensor_to_b64(latent)},
                       {"shape", {latent.h, latent.w, latent.c}}};
    nlohmann::json j = post_json(url_, "/decode", req, timeout_ms_);
    auto s = j.at("shape");
    return b64_to_tensor(j.at("image").get<std::string>(), s.at(0), s.at(1), s.at(2));
}

Tensor RemoteDenoiserBackend::predict_noise(const Tensor& x_t, int t, const std::string& cond_id,
                                            const ControlSignal* control, float cs) {
    nlohmann::json req{{"latent", tensor_to_b64(x_t)},
                       {"shape", {x_t.h, x_t.w, x_t.c}},
                       {"t", t},
                       {"cond_id", cond_id},
                       {"cs", cs}};
    if (control != nullptr) {
        req["control_png"] = base64_encode(encode_gray_png(control->image));
        req["control_kind"] = control_kind_name(control->kind);
    } else {
        req["control_png"] = nullptr;
    }
    nlohmann::json j = post_json(url_, "/predict", req, timeout_ms_);
    auto s = j.at("shape");
    Tensor eps = b64_to_tensor(j.at("eps").get<std::string>(), s.at(0), s.at(1), s.at(2));
    if (!eps.same_shape(x_t)) throw BackendUnavailable("remote eps shape mismatch");
    return eps;
}

}  // namespace glyphforge
