// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

// Generated by scripts/embed_prompts.py from assets/prompts. Do not edit.

#pragma once

#include <string_view>

namespace vpe::templates {

inline constexpr std::string_view idea_generation = R"vpe(You are a machine learning engineer. Your task is to analyze the problem and previous attempts, then propose a new improvement idea. 
Another agent will update the code and prompt to implement the idea later.

Problem Description:
{problem_description}

Previous ideas:
{parent_idea}

{sibling_ideas}

Implications from Previous Experiments:
{parent_implications}


Based on the problem description and the implications from the parent experiment, propose a new idea or strategy to solve the given problem. Consider:
- What worked well based on the parent experiment implications?
- What didn't work well according to the implications?
- What new approaches could be tried based on these implications?
- How can we leverage the available functions more effectively?

IMPORTANT: Your idea must be clearly different from the sibling ideas listed above. Generate a promising idea that builds on the parent experiment's implications while exploring a distinct direction from what siblings have already tried.

Provide a clear, concise idea description (2-4 sentences) that explains the strategy you want to try next. Make sure the idea is simple and concise to make gradual improvement.
The idea should include:
- Plan about which changes to make
- What are the expected results and changes in the result image
- How to evaluate if the idea is successful or not
Which should be excluded in the response:
- Previous failed trials
- Verbose explanation
- Explicit code snippet


Available Functions (signatures + summaries):
{functions_reference}
)vpe";

inline constexpr std::string_view self_evaluation = R"vpe(You are a computer science engineer. Your task is to evaluate an improvement idea on three dimensions: feasibility, expectation, and novelty.

Idea to Evaluate:
{idea}

Sibling ideas:
{sibling_ideas}

Available Functions (signatures + summaries):
{functions_reference}

Evaluate the idea on the following dimensions:

1. **Feasibility** (1-5): Can this idea be implemented using only the available functions listed above?
   - 5: Fully implementable with available functions, no additional capabilities needed
   - 4: Mostly implementable, may require creative use of available functions
   - 3: Partially implementable, some aspects may be challenging with available functions
   - 2: Difficult to implement, requires additional functions and imports
   - 1: Not implementable with available functions

2. **Expectation** (1-5): How confident are you that this idea will make significant improvement to the performance?
   - 5: Very high confidence, idea directly addresses key performance bottlenecks
   - 4: High confidence, idea addresses important aspects of the problem
   - 3: Moderate confidence, idea may provide some improvement
   - 2: Low confidence, idea is unlikely to provide significant improvement
   - 1: Very low confidence, idea is unlikely to help

3. **Novelty** (1-5): How different is this idea from the sibling ideas listed above?
   - 5: Completely different approach, explores new direction
   - 4: Significantly different, with some unique aspects
   - 3: Moderately different, some overlap with siblings
   - 2: Similar to sibling ideas, minor variations
   - 1: Very similar to sibling ideas, minimal differentiation

Return ONLY a JSON object with scores (1-5) for each dimension, without any explanations:
{{
  "feasibility": <1-5>,
  "expectation": <1-5>,
  "novelty": <1-5>
}}

)vpe";

inline constexpr std::string_view sample_analysis = R"vpe(You are analyzing whether an idea was implemented and used correctly for this sample.

Context:
- Idea (intent of the pseudo-code): {idea}
- Prediction (model output for this sample): {prediction}
- Ground truth: {ground_truth}
- Error message (if any): {error}

Image(s) attached in order:
1. Input image for this sample (required)
2. Last image sent to the VLM for answering (optional; if only one image is attached, this was not provided)

Tasks:
(a) Assess whether the idea appears to be implemented and used correctly for this sample given the image(s) and the prediction vs ground truth.
(b) If there was an error or the prediction is wrong, suggest likely causes (e.g., wrong region used, VLM misinterpretation, code bug, missing preprocessing).

Respond in the following format (plain text, no markdown bullets):
IMPLICATIONS: <1-2 sentences on whether the idea was applied correctly and how it influenced the result>
CAUSES: <if error or wrong prediction: 1-2 short bullet-like causes; otherwise write "None">
)vpe";

inline constexpr std::string_view insights = R"vpe(You are an expert in analyzing experimental results. Your task is to summarize the execution results and extract key implications.

Execution Results:
- Success: {success}
- Reward: {reward_str}
- Error: {error}

Idea for This Iteration:
{idea}

Per-Image Analysis:
{image_comparisons}

Provide two outputs:
1. A concise summary (2-3 sentences) of what happened during execution and the results
   - Reference how the stated idea influenced the outcome (success/failure, partial progress)
   - Reference the per-image comparisons when noting visual problems or successes
2. Key implications (2-4 bullet points) about what worked, what didn't, and what could be improved
   - Highlight which images had the most severe differences

Format your response as:
SUMMARY:
[your summary here]

IMPLICATIONS:
- [implication 1]
- [implication 2]
- [implication 3]

)vpe";

inline constexpr std::string_view revision = R"vpe(You are an expert in synthesizing experimental insights. Your task is to revise and consolidate implications by combining the current node's implications with insights from its children's experiments.

Current Node's Implications:
{current_implication}

Children's Implications:
{children_implications}

Your task:
1. Synthesize the key insights from both the current node and its children
2. Identify patterns, common themes, and important learnings
3. Generate a revised, consolidated list of implications
4. Focus on actionable insights that can guide future exploration

Requirements:
- Output must be a bulletized list (using "- " prefix)
- Maximum 5 bullet points
- Each bullet should be concise but informative
- Prioritize the most important and actionable insights
- Remove redundancy and merge similar points

Format your response as a bulletized list:
- [revised implication 1]
- [revised implication 2]
- [revised implication 3]
- [revised implication 4]
- [revised implication 5]

)vpe";

}  // namespace vpe::templates
