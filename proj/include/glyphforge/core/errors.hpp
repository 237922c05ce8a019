#pragma once

#include <exception>
#include <string>

namespace glyphforge {

// Base class for all pipeline errors. Stage wrappers prepend their name so
// the CLI surfaces "[region] InvalidInput: ..." style messages while typed
// catches keep working.
class Error : public std::exception {
public:
    Error(std::string kind, std::string msg) : kind_(std::move(kind)), msg_(std::move(msg)) {
        rebuild();
    }

    const char* what() const noexcept override { return full_.c_str(); }
    const std::string& kind() const { return kind_; }
    const std::string& stage() const { return stage_; }

    void tag_stage(const std::string& stage) {
        if (stage_.empty()) {
            stage_ = stage;
            rebuild();
        }
    }

private:
    void rebuild() {
        full_ = stage_.empty() ? kind_ + ": " + msg_ : "[" + stage_ + "] " + kind_ + ": " + msg_;
    }

    std::string kind_;
    std::string msg_;
    std::string stage_;
    std::string full_;
};

#define GLYPHFORGE_DEFINE_ERROR(Name)                                  \
    class Name : public Error {                                        \
    public:                                                            \
        explicit Name(const std::string& msg) : Error(#Name, msg) {}   \
    }

GLYPHFORGE_DEFINE_ERROR(InvalidInput);
GLYPHFORGE_DEFINE_ERROR(FontNotFound);
GLYPHFORGE_DEFINE_ERROR(MissingGlyph);
GLYPHFORGE_DEFINE_ERROR(TemplateError);
GLYPHFORGE_DEFINE_ERROR(MalformedResponse);
GLYPHFORGE_DEFINE_ERROR(BackendUnavailable);
GLYPHFORGE_DEFINE_ERROR(ShapeError);
GLYPHFORGE_DEFINE_ERROR(InvariantViolation);
GLYPHFORGE_DEFINE_ERROR(CapabilityError);
GLYPHFORGE_DEFINE_ERROR(NumericalError);

#undef GLYPHFORGE_DEFINE_ERROR

// Runs a pipeline phase and stamps its name onto any escaping Error.
template <typename F>
auto with_stage(const char* stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (Error& e) {
        e.tag_stage(stage);
        throw;
    }
}

}  // namespace glyphforge
