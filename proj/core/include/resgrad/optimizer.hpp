#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "resgrad/backend.hpp"
#include "resgrad/backward.hpp"
#include "resgrad/graph.hpp"
#include "resgrad/prompts.hpp"

namespace resgrad {

struct OptimizerSettings {
  double temperature = 0.7;
  int max_new_tokens = 512;
  std::string model;
};

/// `Feedback i (step s): text` blocks, numbered from 1, each followed by a
/// `Context:` line when the item carries a snippet.
std::string render_batch_feedback(const std::vector<FeedbackItem>& items);

/// Batch rewrite request for `component`. Throws EmptyBuffer.
ChatRequest build_update_prompt(const ComponentSpec& component, const std::vector<FeedbackItem>& items,
                                const OptimizerSettings& settings = {});

/// Trimmed text between the first `start_tag` and the next `end_tag`.
/// Throws TagsNotFound.
std::string extract_new_prompt(std::string_view completion, std::string_view start_tag = kImprovedPromptStartTag,
                               std::string_view end_tag = kImprovedPromptEndTag);

}  // namespace resgrad
