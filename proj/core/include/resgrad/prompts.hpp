#pragma once

#include <map>
#include <string>
#include <string_view>

namespace resgrad {

// Prompt templates shipped with the library. Identical copies live in
// assets/prompts/*.txt.
extern const std::string_view kBackwardSystemPrompt;
extern const std::string_view kBackwardRoutingFormat;
extern const std::string_view kBackwardContextTemplate;
extern const std::string_view kOptimizerSystemPrompt;
extern const std::string_view kOptimizerUpdateTemplate;

inline constexpr std::string_view kStopGradientToken = "STOP_GRADIENT";
inline constexpr std::string_view kImprovedPromptStartTag = "<IMPROVED_PROMPT>";
inline constexpr std::string_view kImprovedPromptEndTag = "</IMPROVED_PROMPT>";

/// Python str.format-style substitution: `{name}` is replaced by
/// values.at(name), `{{` and `}}` become literal braces. Substituted values
/// are not rescanned. Throws Error on an unknown or unterminated placeholder.
std::string format_template(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values);

}  // namespace resgrad
