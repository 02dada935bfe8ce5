#include "memfly/prompts.hpp"

#include <cctype>

namespace memfly::prompts {

const std::string_view kSemanticIngestion =
    R"P(You are an expert Knowledge Graph Extractor. Your task is to analyze the [TARGET TURN] to extract structured metadata.

Input Text: {content}

Guidelines:

1. Keywords (Entities):
- GOAL: Extract 3-5 specific Noun Phrases explicitly present in the text.
- FOCUS PRIORITIES:
  1. Proper Nouns: People (e.g., "Melanie"), Locations, Organizations.
  2. Concrete Objects: Physical items (e.g., "painting", "plate", "contract").
  3. Specific Topics: "LGBTQ support group", "deadline".
- CRITICAL STOP LIST: Ignore conversational meta-roles, abstract terms, and speaker names acting purely as subjects.
- ZERO-SHOT RULE: If the text is purely phatic (e.g., "Wow", "That's cool"), return an empty list.
2. Context (Factual Restatement):
- GOAL: Rewrite the text into a self-contained factual statement.
- CONSTRAINT 1 (Strict Fidelity): Only use information present in the Input Text.
- CONSTRAINT 2 (Safe Resolution): Resolve "I/my/we" using the Speaker's name if it appears in the text. For external pronouns where the antecedent is missing, keep the pronoun or use a generic term. Do not guess.
- CONSTRAINT 3 (No Meta-Language): Start directly with the subject. Avoid "The speaker says...".

Output Format (JSON):
{"keywords": ["entity1", "entity2"], "context": "Melanie thinks the item is cool."}
)P";

const std::string_view kGatedUpdate =
    R"P(Role: You are a Knowledge Graph Updater. Your job is to evaluate the relationship between a NEW NODE and existing CANDIDATE NODES.

[NEW NODE]
Content: "{content}"
Context: "{context}"
Keywords: {keywords}

[CANDIDATE NODES]
{candidates_str}

Instructions:

Analyze each candidate and generate a JSON response following these rules:

1. Analyze Relationship:
- Determine relation_type: 'SUPPORTS', 'CONFLICTS', or 'RELATED_TO'.
- Assign connection_strength (0.0 – 1.0), indicating the degree of semantic overlap or logical connection.

2. Determine Operation (Based on Strength):
- CASE A: Strength ≥ 0.8 (High Redundancy) → MERGE
  - Action: Integrate details from the New Node into the candidate's context.
  - Template: "[Original Context]. Specifically, [New Node Info]..."
- CASE B: Strength ∈ [0.5, 0.8) (Complementary) → LINK
  - Action: Establish associative edge; keep contexts separate.
  - Template: "[Original Context]. (Related: [New Node Keyword])"
- CASE C: Strength < 0.5 (Distinct) → APPEND
  - Action: Add New Node as autonomous unit; no modification.
- CASE D: relation_type is 'CONFLICTS' → LINK with Contrast
  - Action: Note the conflicting information explicitly.
  - Template: "[Original Context]. However, [New Node] indicates that..."

3. Output: Return strictly valid JSON matching the schema.
)P";

const std::string_view kQueryIntent =
    R"P(Analyze the user query to identify its Target Taxonomy Category, extract key entities, and detect time-related intent.

Task 1: topic_desc (Target Category)
- Predict the Taxonomy Category or Subject Heading this query falls under.
- Style: Strict Noun Phrase (like a book chapter title or library category).
- Constraint: Keep it under 8 words.
- Do NOT describe the user's intent (e.g., avoid "how to...", "techniques for..."). Instead, name the topic itself.

Task 2: Keywords
- Extract 3-5 core entities, technical terms, or specific concepts.
- CRITICAL: Convert terms to their canonical singular form (e.g., "transformers" → "Transformer").
- Exclude generic verbs or stop words.

Query: {query}

Output Format (JSON):
{"topic_desc": "Concise Noun Phrase",
 "keywords": ["keyword1", "keyword2", "keyword3"]}
)P";

const std::string_view kSufficiency =
    R"P(You are a reflector agent that evaluates whether the current context and answer is sufficient to answer a question.

Question: {question}

Current Context and Current Answer:
{context}

Evaluate whether the provided context and answer contains enough information to answer the question comprehensively.

If the context and answer is insufficient, identify what specific information is missing.

Output Format (JSON):
{"sufficient": true or false,
 "missing_info": "description of missing information",
 "confidence": 0.0 to 1.0}
)P";

const std::string_view kSubQuery =
    R"P(You are a Query Evolution Agent. Your goal is to decompose a complex user question into a specific, actionable sub-query to retrieve missing information from a Knowledge Graph.

Original Question: "{query_str}"

Current Known Information (Context):
{context_str}

History of Reasoning Steps (Q&A):
{prev_reasoning}

CRITICAL: The Reflector Agent has identified the following MISSING INFORMATION needed to answer the main question:
{missing_info}

Task: Based on the "Missing Information" and "History", formulate the NEXT single sub-question to retrieve this missing info.
- The sub-question must be specific.
- It should act as a search query for the next hop.
- If we have enough information to answer the main question, return 'None'.

Sub-question:
)P";

const std::string_view kDefaultAnswer =
    R"P(Answer the question using only the memories below. Reply with a short phrase, not a sentence.

Memories:
{context}

Question: {question}
Answer:)P";

const std::string_view kGatedUpdateSchema =
    R"P(Respond with a single JSON object and nothing else:
{"judgments": [{"candidate_id": <integer id from [CANDIDATE NODES]>, "relation_type": "SUPPORTS" | "CONFLICTS" | "RELATED_TO", "connection_strength": <number 0.0-1.0>, "merged_context": <string, only for CASE A>}]})P";

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            std::size_t j = i + 1;
            while (j < tmpl.size() && (std::isalnum(static_cast<unsigned char>(tmpl[j])) || tmpl[j] == '_')) ++j;
            if (j < tmpl.size() && tmpl[j] == '}' && j > i + 1) {
                if (auto it = vars.find(std::string(tmpl.substr(i + 1, j - i - 1))); it != vars.end()) {
                    out += it->second;
                    i = j + 1;
                    continue;
                }
            }
        }
        out.push_back(tmpl[i]);
        ++i;
    }
    return out;
}

} // namespace memfly::prompts
