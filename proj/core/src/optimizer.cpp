#include "resgrad/optimizer.hpp"

#include "resgrad/text.hpp"

namespace resgrad {

std::string render_batch_feedback(const std::vector<FeedbackItem>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += "\n\n";
    out += "Feedback " + std::to_string(i + 1) + " (step " + std::to_string(items[i].step) + "): ";
    out += items[i].local_text;
    if (!items[i].context_snippet.empty()) {
      out += "\nContext: ";
      out += items[i].context_snippet;
    }
  }
  return out;
}

ChatRequest build_update_prompt(const ComponentSpec& component, const std::vector<FeedbackItem>& items,
                                const OptimizerSettings& settings) {
  if (items.empty()) throw EmptyBuffer(component.id);
  ChatRequest r;
  r.system = std::string(kOptimizerSystemPrompt);
  r.user = format_template(kOptimizerUpdateTemplate, {
                                                         {"variable_desc", component.role_description},
                                                         {"variable_short", component.prompt_text},
                                                         {"variable_context", render_batch_feedback(items)},
                                                         {"start_tag", std::string(kImprovedPromptStartTag)},
                                                         {"end_tag", std::string(kImprovedPromptEndTag)},
                                                     });
  r.temperature = settings.temperature;
  r.max_new_tokens = settings.max_new_tokens;
  r.model = settings.model;
  return r;
}

std::string extract_new_prompt(std::string_view completion, std::string_view start_tag, std::string_view end_tag) {
  const auto start = completion.find(start_tag);
  if (start == std::string_view::npos) throw TagsNotFound(std::string(start_tag), std::string(end_tag));
  const auto body = start + start_tag.size();
  const auto end = completion.find(end_tag, body);
  if (end == std::string_view::npos) throw TagsNotFound(std::string(start_tag), std::string(end_tag));
  return std::string(trim(completion.substr(body, end - body)));
}

}  // namespace resgrad
