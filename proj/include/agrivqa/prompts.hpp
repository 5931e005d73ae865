#pragma once

#include <map>
#include <string>

#include "agrivqa/config.hpp"
#include "agrivqa/domain.hpp"

namespace agrivqa {

/// Substitutes {name} placeholders from the binding map. Placeholders are
/// lowercase identifiers; a placeholder with no binding raises
/// TemplateRenderError. Non-identifier braces pass through untouched.
std::string render_template(const std::string& text,
                            const std::map<std::string, std::string>& bindings);

/// The full editable template set used by the pipeline. Defaults are built
/// in; a templates file (JSON: {template_name: {"system": ..., "user": ...}})
/// overrides individual entries.
struct TemplateSet {
    PromptTemplate caption;
    PromptTemplate caption_refine;
    PromptTemplate caption_judge;
    PromptTemplate diagnosis;           // with caption context
    PromptTemplate diagnosis_baseline;  // no caption context
    PromptTemplate knowledge;
    PromptTemplate knowledge_baseline;
    PromptTemplate answer_judge;
    PromptTemplate qa_judge;

    /// Digest over every template (manifest + cache key ingredient).
    std::string digest() const;
};

TemplateSet default_templates();

/// Defaults overlaid with the overrides file when the path is non-empty.
TemplateSet load_templates(const PipelineConfig& cfg);

/// Extra instruction appended when a caption tripped the leakage guard.
extern const char* kLeakageRegenInstruction;

}  // namespace agrivqa
