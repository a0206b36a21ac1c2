#include "resgrad/prompts.hpp"

namespace resgrad {

// Kept byte-identical to the files under assets/prompts/ (minus the final newline).

const std::string_view kBackwardSystemPrompt = R"PROMPT(You are an expert failure analyst for a multi-step AI system.
You will analyze a component's trace. Your goal is to pinpoint exactly WHY it failed.
CRITICAL ANALYSIS STEPS:
1. Did the component strictly follow its instructions? If no -> LOCAL fault.
2. Was the input physically insufficient to produce the desired output?  -> UPSTREAM fault.
3. AVOID "HINDSIGHT BIAS": Do not blame the component for not knowing facts that were not provided in the context.
4. Distinguish between "Format Error", "Hallucination", and "Missing Info".
Output strictly in the requested format.)PROMPT";

const std::string_view kBackwardRoutingFormat = R"PROMPT(Output exactly TWO sections, in this exact order:

LOCAL:
(feedback for improving THIS component prompt only; or leave empty)

UPSTREAM:
(STOP_GRADIENT OR feedback for upstream components)

Rules:
- If the failure is mainly caused by THIS component's output (<LM_OUTPUT>), write LOCAL and set UPSTREAM to STOP_GRADIENT.
- If the failure is mainly caused by UPSTREAM inputs (<LM_INPUT>), leave LOCAL empty and write UPSTREAM feedback.
- If UPSTREAM is STOP_GRADIENT, output ONLY the token STOP_GRADIENT (no punctuation, no extra words).
- Do NOT output anything outside these two sections.)PROMPT";

const std::string_view kBackwardContextTemplate = R"PROMPT(You will give feedback to a prompt with the following role:
<ROLE>{variable_desc}</ROLE>

Here is a conversation with a language model:
<LM_SYSTEM_PROMPT>{system_prompt}</LM_SYSTEM_PROMPT>
<LM_INPUT>{lm_input}</LM_INPUT>
<LM_OUTPUT>{lm_output}</LM_OUTPUT>

This conversation is part of a larger system. The <LM_OUTPUT> was later used as {response_desc}.
Treat <LM_OUTPUT> as this component's incremental contribution at this step.
Attribute responsibility by asking: could changing <LM_OUTPUT> (given the same <LM_INPUT>) reasonably fix the objective?

<OBJECTIVE_FUNCTION>{objective_feedback}</OBJECTIVE_FUNCTION>

We are interested in giving feedback to the following span of text:
<VARIABLE>{variable_short}</VARIABLE>

Given the above history, route feedback into LOCAL vs UPSTREAM to improve the objective.)PROMPT";

const std::string_view kOptimizerSystemPrompt = R"PROMPT(You are part of an optimization system that improves text (the prompt).
You will receive feedback and context, and use them to improve the prompt.
The feedback may be noisy; identify what is important and correct.
Pay attention to the role description and the context where the prompt is used.
This is very important: You MUST return the improved prompt only between the required tags.)PROMPT";

const std::string_view kOptimizerUpdateTemplate = R"PROMPT(You are an expert Prompt Engineer for a Compound AI System.
You will optimize the system prompt for a specific component based on a batch of failure feedback from multiple execution traces.

The feedback contains:
1. Context: What the component saw.
2. Local Fix: What the component *should* have done.
3. Upstream Feedback: Ignore this (it belongs to other components).

Your goal: Rewrite the <VARIABLE> prompt to make the component more robust, strictly compliant, and immune to the observed failure modes across ALL future inputs.

Component Role:
<ROLE>{variable_desc}</ROLE>

Current Prompt:
<VARIABLE>{variable_short}</VARIABLE>

Batch Feedback:
<BATCH_FEEDBACK>
{variable_context}
</BATCH_FEEDBACK>

ANALYSIS & OPTIMIZATION STRATEGY:
1. **Identify High-Level Patterns**: Look across the batch. Are failures due to format violations, logic edge cases, hallucination, or over-truncation?
2. **Avoid Overfitting**: DO NOT mention specific entities, code variables, or exact answers from the feedback. Generalize the fix (e.g., instead of "Handle variable x", write "Handle uninitialized variables").
3. **Harden Constraints (Negative Prompting)**: If the model hallucinated or used placeholders, add explicit negative constraints (e.g., "NEVER make up facts", "DO NOT output markdown fences").
4. **Structural Reinforcement**: Place the most critical rules at the end of the prompt (the recency effect for LLMs). Use ALL CAPS for critical constraints.
5. **Maintain Residual Identity**: The component must only output the required increment (Delta) as defined in its role. Do not expand its scope.

OUTPUT INSTRUCTIONS:
- You must output the fully rewritten prompt between the {start_tag} and {end_tag} tags.
- The new prompt must be self-contained, clear, and stricter than the original.

{start_tag}{{new_prompt}}{end_tag})PROMPT";

}  // namespace resgrad
