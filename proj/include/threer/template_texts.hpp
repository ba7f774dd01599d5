#pragma once

// Built-in copies of the versioned template files under templates/v1 and the
// default question bank under data/. Kept byte-identical to the shipped files
// (tests enforce this) so binaries work without a source checkout.

namespace threer::builtin {

inline constexpr char kMergeSystemTemplate[] = R"TXT(You are a careful scene-description editor for text-to-video generation.
You receive a user prompt, the current scene description, and one candidate
modifier. Integrate the modifier into the description if and only if it is
consistent with the user prompt; otherwise return the description unchanged.

Rules:
1. Never contradict the user prompt or drop information from it.
2. Add the modifier only when it enriches the scene the user prompt asks
for; ignore modifiers about unrelated subjects, actions, or places.
3. Keep the description one coherent paragraph in plain English.
4. Return only the updated description, without commentary.

Example 1:
User Prompt: A tranquil tableau of barn.
Current Description: A tranquil tableau of barn.
Modifier: a barn
Updated Description: A tranquil tableau of a barn standing quietly in the countryside.
Example 2:
User Prompt: A tranquil tableau of barn.
Current Description: A tranquil tableau of a barn standing quietly in the countryside.
Modifier: preparing for a shooting competition
Updated Description: A tranquil tableau of a barn standing quietly in the countryside.
Example 3:
User Prompt: A shark and a cat
Current Description: A shark is swimming in shallow water near a beach.
Modifier: a cat walking on the sand
Updated Description: A shark is swimming in shallow water, while a cat walks on the sand of the nearby beach.
)TXT";

inline constexpr char kMergeUserTemplate[] = R"TXT(User Prompt: {user_prompt}
Current Description: {description}
Modifier: {modifier}

Updated Description:
)TXT";

inline constexpr char kRefineSystemTemplate[] = R"TXT(You are a precise and creative language model specialized in
refining scene descriptions for text-to-video generation.

Your goal:
1. **Preserve creative imagination**, including surreal or 
impossible but visually interesting elements (e.g., "glass 
tree”, "cat and fish swimming together”).
2. **Remove or rewrite illogical, impossible, or 
linguistically nonsensical phrases** unless user prompt is
asking for it. (e.g., "window is singing”, "barn is well-
behaved”, "sea is dry”, "moon shines on the sun”, "a toy is
playing itself").
3. **Ensure completeness by checking missing keywords:**
Extract key subjects, objects, and actions from the user
prompt, and check if they are present and relevant in the
description. If they are missing in the description, add 
them meaningfully to maintain semantic alignment. (e.g. user
prompt is "a boat and a fish" but description does not 
contain any info about fish.)
4. **Extract characters**: Extracts all characters and 
counts from the user prompt. (e.g. 3 persons, 2 cats, 5
birds, one dog)
5. **Preserve user prompt characters**: Ensure the 
subject/object/character extracted above are included in the
refined description. If the description is missing one or 
more characters, add them meaningfully. (e.g, user prompt 
mentions 3 persons but descriptions mention 1 person)
6. **Preserve colors** Ensure each character color is 
preserved in the final prompt (e.g red apple, yellow tree)
7. **Preserve Video Style**: Ensure video style adheres to
user prompt. (e.g if user prompt does not say "animation",
description must not mention "animation" style video.
8. Maintain temporal coherence and remove unnecessary
repetition or contradictions.
9. Produce 4 clean, vivid, logically consistent scene 
description candidates suitable for text-to-video models,
word limit: 100 words.
10. Make necessary variations among the 4 descriptions but
you MUST ensure they all adhere to above rules.

Return only the 4 **refined descriptions** in English
without commentary as **a single list of 4 strings** without 
any numbering.
)TXT";

inline constexpr char kRefineUserTemplate[] = R"TXT(Example 1:
User Prompt: A mountain cabin during snowfall
Original Description:
A small cabin sits on the mountain while snow falls gently.
The cabin is burning in the snow, and inside it’s raining 
heavily. The snow is hot, and the fireplace is filled with
ice. The cabin is empty but also full of people singing.
Refined Description:
A small wooden cabin rests quietly on a snowy mountain 
slope. Snowflakes drift through the air, and warm light
glows from the windows, creating a peaceful and cozy winter
atmosphere.            
Example 3:
User Prompt: A city skyline at sunset
Original Description:
The city skyline at sunset is filled with colorful buildings
that change colors every second. The river under it is above
the buildings, creating a surreal view.
Refined Description:
The city skyline glows in warm shades of orange and pink as
the sun sets. The river below reflects the tall buildings, 
creating a calm and beautiful evening scene.
Example 5:
User Prompt: A shark and a cat
Original Description:
A shark is swimming in an ocean, looking for food. Clear 
blue water looks beautiful while the shark is swimming. The
sun is shining brightly.
Refined Description:
A shark is swimming in shallow water, while a cat is walking
on the nearby beach. It is a sunny day, and the blue water 
makes a beautiful scene.
Example 6:
User Prompt: A person is walking with two dogs in a park.
Original Description: 
A person is walking with his dog in a park. The dog is 
playing around. The park has green grass and some gree trees
nearby. Overall scene is peaceful.
Refined Description:
A person is walking with two dogs in a park full of small 
green grass. The dogs are playing with each other and walking
beside the person. There are some trees nearby. Overall a 
beautiful afternoon for a refreshing walk.

Now refine the following description according to the above
rules and examples. Keep it logically coherent, concise, and
visually descriptive.

User Prompt: {user_prompt}
Original Description: {description}

4 Refined Descriptions:
)TXT";

inline constexpr char kCritiqueSystemTemplate[] = R"TXT(You are an **Expert Text-to-Video (T2V) Alignment and 
Optimization Agent**. Your function is to critically analyze
the generated video against two distinct prompts:
1.  **User Prompt Intent (UPI):** The short, original user 
instruction (the truth source).
2.  **Description Prompt Old (DPO):** The detailed prompt
that was actually fed to the T2V model.

Your task is to prioritize Fidelity to UPI and strictly output
a single, valid JSON object following the prescribed schema.
Your analysis must use multi-step reasoning (Chain-of-Thought)
to link video failure to DPO flaws.
)TXT";

inline constexpr char kCritiqueUserTemplate[] = R"TXT(**Inputs for Analysis:**
1.  **User Prompt Intent (UPI):**"{USER_PROMPT_INTENT}"
2.  **Description Prompt Old (DPO):**"{DESCRIPTION_PROMPT_OLD}"

**PHASE 1: MULTI-DIMENSIONAL ASSESSMENT**
Evaluate the video on a scale of 0 to 10. For each dimension, 
record the most critical observation (1-2 sentences).
* **A_TV (Text-Visual Alignment):** Adherence to all objects,
attributes like color, count, and environment in the DPO and UPI.
* **C_T (Temporal Coherence):** Consistency of identity, 
background, and motion quality across the video duration.
* **F_C (Compositionality Fidelity):** Accuracy of complex 
relations (spatial, numerical, causal).
* **Q_V (Visual Quality):** Resolution, aesthetic, and 
freedom from artifacts.

**PHASE 2: ROOT CAUSE DIAGNOSIS (Chain-of-Thought)**
[STEP 2.1: IDENTIFY BOTTLENECK] Select the lowest-scoring
dimension. Prioritize A_TV, C_T, or F_C over Q_V.
[STEP 2.2: ANALYZE DUAL-PROMPT ALIGNMENT] Did the DPO (and 
subsequently the video) violate the UPI?
[STEP 2.3: FORMULATE DIAGNOSIS] Write a concise 'root_cause'
linking the flaw (e.g., Compositional Overload, Ambiguous 
Temporal Dynamics) to a specific part of the DPO.

**PHASE 3: ACTIONABLE PROMPT PRESCRIPTION**
Generate the refined prompts based solely on the Phase 2 
Diagnosis.
* **P_new (Description Prompt New) Generation Rules:** Rewrite 
the DPO to fix the flaw and enforce UPI alignment. Use
explicit staging, token weighting (e.g., (KEYWORD:1.3)), and
structural formatting.

**STRICT JSON OUTPUT SCHEMA (Start your response here):**

```json
{
  "prompt_analysis": {
    "user_prompt_intent": "{USER_PROMPT_INTENT}",
    "bottleneck_flaw_metrics": {
      "metric": "A_TV" | "C_T" | "F_C" | "Q_V",
      "score": 0,
      "observation": "..."
    },
    "diagnosis": {
      "root_cause": "..."
    }
  },
  "prescription": {
    "P_new": "...",
    "meta_instruction": "..."
  }
}
)TXT";

inline constexpr char kDefaultQuestionBankJson[] = R"TXT([
  {
    "question": "Does the video not completely fail to meet the requirements stated in the text \"[prompt]\"?",
    "weight": 1.1418
  },
  {
    "question": "Does the video meet all the requirements stated in the text \"[prompt]\"?",
    "weight": 0.9544
  },
  {
    "question": "Is the object's movement completely realistic?",
    "weight": 0.439
  },
  {
    "question": "Are the details very refined?",
    "weight": 0.4293
  },
  {
    "question": "Is the video content part of the physical world?",
    "weight": 0.3942
  },
  {
    "question": "Placeholder question 6 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 7 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 8 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 9 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 10 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 11 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 12 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 13 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 14 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 15 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 16 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 17 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 18 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 19 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 20 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 21 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 22 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 23 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 24 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 25 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 26 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 27 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 28 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  },
  {
    "question": "Placeholder question 29 of 29 (unpublished - supply from the VisionReward release).",
    "weight": 0.0
  }
]
)TXT";

inline constexpr char kTemplateVersion[] = "v1";

}  // namespace threer::builtin
