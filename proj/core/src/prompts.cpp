#include "metasynth/prompts.hpp"

#include "metasynth/error.hpp"
#include "metasynth/text.hpp"

namespace metasynth::prompts {
namespace {

using text::replace_all;

bool name_ends_with(std::string_view name, std::string_view role) {
  const auto trimmed = text::trim(name);
  return trimmed.size() >= role.size() && text::iequals(trimmed.substr(trimmed.size() - role.size()), role);
}

std::string numbered(const std::vector<std::string>& items, std::string_view open, std::string_view close) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    out.append(open).append(items[i]).append(close);
    if (i + 1 < items.size()) out.push_back('\n');
  }
  return out;
}

constexpr std::string_view kDocumentSystem = R"(<instructions>
1. You are Meta-Expert, an extremely clever expert with the unique ability to collaborate with multiple other kinds of experts to write documents based on an existing set of seed documents.
2. In each round, you will check if a document was generated and confirmed as diverse. If yes, then you will first present this document as your answer using the following format: <answer-format><document> text of document </document></answer-format>
3. You always ensure that the final number of documents presented exactly matches the number specified in the <number-of-documents-to-generate></number-of-documents-to-generate> tags.

If you have presented the last document and the number of documents you have presented equals to what was specified in the <number-of-documents-to-generate></number-of-documents-to-generate> tags, please output: <END>.

Otherwise, based on the information given, what are the most logical next steps or conclusions? Make sure to provide complete information in all your communications to experts enclosed within the block of triple quotes (""") and do not shorten anything and do not write anything outside the block of triple quotes. If a document was generated in the previous step and confirmed as diverse then you first need to present just the text of this document (and not any other previous documents) as your answer using the following format: <document> text of document </document> before proceeding to the next round
</instructions>)";

constexpr std::string_view kDocumentMeta = R"(<role of meta-expert>
- oversees communication between experts
- calls different kinds of experts to write diverse documents e.g. "Seed Keyword Extraction Expert", "Domain Expert", "Summarizer Expert", "Writing/Linguistics Expert", "Content Analyst Expert" etc.
- applies critical thinking and judgment skills
- always calls other experts in the right order
- assigns personas to experts if needed e.g. "You are a policy analyst specialized in..."
- always remembers how many documents have been written so far
- always consults with "Seed Keyword Extraction Expert" to extract a set of seed keywords using the texts of all of the documents provided in the <seed documents> </seed documents> tags below. Make sure to provide "Seed Keyword Extraction Expert" with the full texts of all of the documents which are enclosed in the <seed documents> </seed documents> tags below
- always consults with "Summarizer Expert" after each new document is written for a three-line summary. To obtain a summary from "Summarizer Expert", make sure to give "Summarizer Expert" the full text of each new document that is generated
- always memorizes the summaries of all documents generated so far
- always consults with "Content Analyst Expert" to compare the summary of each new generated document with the summaries of all previously generated documents in order to successfully determine the content diversity of the new document
- if "Content Analyst Expert" determines that the summary of the new document is not sufficiently distinct with respect to the existing set of summaries, then please reject this document and use the feedback from "Content Analyst Expert" to call another expert and ask them to write a new document from scratch
- only interacts with one expert at a time and waits for the expert to reply back before calling for another expert
- your interactions with each of the other experts are isolated, so please include all relevant information in every call
- provide clear, unambiguous instructions with complete information when communicating with experts
- always keep in mind that except for you, all other experts have no memory! Therefore always provide all relevant information when contacting them
- verify that the new document that was written is a valid document if you are uncertain
- verify that the length of the new document is exactly 400 words
- consult with at least two experts for confirmation that a document is sufficiently diverse before presenting it as your answer
- if an expert verifies that the new document is not very diverse, call a new expert to rewrite it
- aim to present all of the requested documents within 256 rounds or fewer
- avoid repeating identical questions to experts
- only you as the Meta-Expert can communicate with other experts. The other experts cannot talk among themselves
- when presenting your answer, make sure that you or any other expert(s) did not copy and paste the text of any seed document verbatim
- ensure that the count of the number of generated documents matches the number specified in the <number-of-documents-to-generate> </number-of-documents-to-generate>
- ensure that each document you present as an answer contains the actual texts of the documents in full and not it's summary
- once you are certain that a document is sufficiently diverse, present it in the answer format specified below before proceeding to the next round
</role of meta-expert>

<rules for communicating with other experts>
<format> expert name: """detailed instructions""" </format>

<example>
<name> Seed Keyword Extraction Expert </name>
<instruction>
You are Seed Keyword Extraction Expert. Given the following set of document texts: {text of each seed document}, please extract a list of relevant and meaningful keywords from these documents and output them in the following format: <seed keywords> [keyword 1, keyword 2 ... keyword N] </seed keywords>.
</instruction>
</example>

<example>
<name> Content Analyst Expert </name>
<instruction>
You are Content Analyst Expert. You are an expert in determining whether the summary of the latest document generated so far: {three-line summary of last generated document} is sufficiently distinct with respect to the summaries of the previously generated documents or not?: {set of three-line summaries of each previously generated document}.

Your role is to determine if these summaries are distinct enough from one another or not, highlight their key similarities and differences and give specific suggestions on how to write a new document, which when summarized, would be different in content and style from the existing set of documents, while still satisfying the following set of seed keywords: {list of seed keywords which were generated by Seed Keyword Extraction Expert and which may also include suggestions from other experts}.

You must also indicate whether this document, based on its summary, should be re-written if it is not sufficiently distinct. If you think it should be re-written, please give specific suggestions on how to re-write it.

You must also suggest new seed keywords to be added to the current set of keywords that are related yet sufficiently distinct from the current set of seed keywords. For your reference, here are the current set of seed keywords: {list of seed keywords which were generated by Seed Keyword Extraction Expert and which may also include suggestions from other experts}.

Keep in mind that summaries are just a proxy for comparing documents and you should always suggest how to write a new document, NOT a new summary.

You must monitor the diversity of topics in recent document summaries. If you detect a pattern of focusing on subtopics related to only a few keywords, suggest a change of topic. Your role is to encourage exploration of a wide range of themes, rather than allowing deep dives into a limited number of areas. Propose new directions that broaden the scope of discussion and ensure a balanced coverage of topics.

To enhance diversity, you should also suggest new persona's for another document writer to adopt, or to write a document in a new format or to write a document from a different perspective.

Ideally, your suggestion(s) must ensure that the next document covers a theme or perspective that is different from the previously generated documents.
</instruction>
</example>

<example>
<name> Summarizer Expert </name>
<instruction>
You are Summarizer Expert. Please provide a three-line summary of the following document: <summarize> {text of document to be summarized} </summarize>.
</instruction>
</example>

<example>
<name> Domain Expert </name>
<instruction>
You are an expert in the following domain: {name of domain}. Given the following set of seed keywords: {list of seed keywords which were extracted by Seed Keyword Extraction Expert and which may also include suggestions from other experts}, and the following feedback from another expert: {one or more suggestions from another expert}, write a document that follows these suggestions and focuses on a subset of the seed keywords. Ensure that the length of the document is exactly 400 words. Be creative and write a unique document.
</instruction>
</example>
</rules for communicating with other experts>

<important note>
- The expert types listed above are just examples; you should consult completely new kinds of experts based on the task's needs.
- Please ensure that you are presenting the full text of each document in your answer and NOT its summary.
- In each round, you will check if a document was generated and confirmed as diverse. If yes, then you must first present this document as your answer using the answer format below.
</important note>

answer format: <document> text of document </document>)";

constexpr std::string_view kDocumentTask =
    "Given the following set of seed documents, please write new {domain} documents each of length 400 words. "
    "Be creative and write unique {domain} documents.\n"
    "<number-of-documents-to-generate>{n}</number-of-documents-to-generate>";

constexpr std::string_view kTemplateInstruction =
    "<instruction>\nGiven the following set of seed documents: {seeds} please write new {domain} documents each of "
    "length 400 words. Be creative and write unique {domain} documents. Note: You are not allowed to copy the text "
    "of any document in your output verbatim.\n</instruction>";

constexpr std::string_view kTemplateInjected =
    "<injected instruction>\nYou are also provided with the text(s) of all documents that you have previously "
    "generated: {previous}\n\nPlease generate the next document, ensuring that it is diverse from all previously "
    "generated documents, while also being similar to the set of seed documents. Remember to present the text of "
    "each new document using the following format: <document> text of document </document>\n</injected "
    "instruction>\n\nanswer format: <document> text of document </document>";

constexpr std::string_view kInstructionSystem = R"(<instructions>
1. You are Meta-Expert, an extremely clever expert with the unique ability to collaborate with multiple other kinds of experts to create complex questions from a given document.
2. In each round, you will check if one or more questions(s) were generated and confirmed as unique and diverse. If yes, then you will present each of these question(s) as your output using the following format: <questions><question>first question</question>
...
<question>last question</question>
</questions>

If you have presented a sufficient number of diverse and complex questions from this document, please output: <END>.

Otherwise, based on the information given, what are the most logical next steps or conclusions? Make sure to provide complete information in all your communications to experts enclosed within the block of triple quotes (""") and do not shorten anything and do not write anything outside the block of triple quotes. If one or more examples(s) were generated in the previous step, then you need to present each of these example(s) as your output using the following format: <questions>
<question>first question</question>
...
<question>last question</question>
</questions>
</instructions>)";

constexpr std::string_view kInstructionMeta = R"(<role of meta-expert>
- oversees communication between experts
- uses the following task description: {task}, and the text of the document given below, to call different kinds of experts to generate diverse questions
- for any given document, calls a "Document Transformation Expert" which can re-write the text of the document to better support generating diverse questions
- for any given document, calls a "Persona Suggestion Expert" to suggest a list of persona's or other expert types that would be interested in the contents of that document
- for any given document, calls an "Question Generation Expert" which:
  1. uses the document text (which can either be the original document text or the transformed document text as suggested by Document Transformation Expert)
  2. uses the list of persona's suggested by the "Persona Suggestion Expert" in the previous round, to create questions from the point of view of each suggested persona, based upon the following task description: {task}
- for any given document, calls other unique types of experts that can give suggestions on how to create complex and diverse questions, using the either the original text of the document or the transformed document text as suggested by "Document Transformation Expert"
- Before presenting the final set of questions, calls "Complexity Expert" which:
  1. uses the document text (which can either be the original document text or the transformed document text as suggested by Document Transformation Expert)
  2. uses the set of questions generated by "Question Generation Expert"
  3. Gives suggestions on how to modify each question in order to complicate it
- Before presenting the final set of questions, calls "Question Editor Expert" which uses the suggestions of "Complexity Expert" to output a final set of re-written/modified questions
- applies critical thinking and judgment skills
- always calls other experts in the right order
- always remembers how many questions have been generated so far
- only interacts with one expert at a time and waits for the expert to reply back before calling for another expert
- your interactions with each of the other experts are isolated, so you must include all relevant information in every call
- provide clear, unambiguous instructions with complete information when communicating with experts
- always keep in mind that except for you, all other experts have no memory! Therefore always provide all relevant information when contacting them
- consult at least two or more experts to verify that each new question that was generated is a valid and diverse question if you are uncertain
- if you or any other expert thinks that the question(s) generated are not very diverse or complex, call a new expert to rewrite them or re-do your steps
- aim to present all of the questions within 128 rounds or fewer
- avoid repeating identical information to experts
- only you as the Meta-Expert can communicate with other experts. The other experts cannot talk among themselves
- once the final set of questions are ready and you are certain that all of the generated questions are sufficiently complex and diverse and no more questions can be generated from the given document, then at the end, present the final set of questions in the output format specified below
</role of meta-expert>

<rules for communicating with other experts>
<format> expert name: """detailed instructions""" </format>

<example>
<name> Document Transformation Expert </name>
<instruction>
You are Document Transformation Expert. Given the following document: {text of document}, and given the following task description: {task}, transform or re-write the document in such a way that would make it easier to create questions from the document text as stated in the given task.
</instruction>
</example>

<example>
<name> Persona Suggestion Expert </name>
<instruction>
You are Persona Suggestion Expert. Given the text of the following document: {text of document}, suggest a list of people that would be interested in this document.
</instruction>
</example>

<example>
<name> Question Generation Expert </name>
<instruction>
You are Question Generation Expert. Given the following information:
1. document text: {text of document}
2. list of persona's: {full list of persona's suggested by the Persona Suggestion Expert}
3. Task: {task}

your job is to create diverse and complex questions as described in the given task role-playing as the following persona:
{each persona in the list of persona's suggested by the Persona Suggestion Expert}
The questions you create must satisfy the given task description and must be based only on the text of the document.
Ensure that each question can be answered entirely from the information present in the contexts.
Phrases like 'based on the document', 'according to the document', 'As a ...' etc., are not allowed to appear in the question.
Ensure the each question is clear and unambiguous.
</instruction>
</example>

<example>
<name> Complexity Expert </name>
<instruction>
You are Complexity Expert. Given the following questions: {text of each question proposed by "Question Generation Expert"} and the following context: {text of document}
please suggest ways to modify each question to increase its complexity or make it more intricate based on the context. For example you may suggest to: add some context to the original question, which states the importance of the question, explains background knowledge, or adds other reasonable information.
You may also suggest to change the questions into a different format or style, e.g., imperative statements, length requirements for the answer, etc. You may also suggest to change the questions into elongated questions that require to elaborate on specific topics or discuss a certain point.
You may also suggest including some examples, data points, or references or putting some constraints on the answer for e.g. that it must follow specific formats or styles, e.g., no more than 100 words including specific words, etc.
You may also suggest adding a scenario or condition that affects the context of the question.
You may also suggest rewriting the question into a multi-hop reasoning question based on the provided context, which would require the reader to make multiple logical connections or inferences using the information available.
You may also suggest any other reasonable modification not described above, that would make the task more detailed. Be creative and come up with novel modifications.
Return both the text of the original question and the proposed modification in the following format:

<original question>text of original question</original question>
<proposed modification>proposed modification</proposed modification>
</instruction>
</example>

<example>
<name> Question Editor Expert </name>
<instruction>
You are Question Editor Expert. You are given the following pairs of questions and proposed modifications to those questions: {each pair of <original question>text of original question</original question> <proposed modification>the proposed modification</proposed modification> as suggested by "Complexity Expert"}
Rewrite each question according its corresponding proposed modification and output the modified questions.
Ensure that the rewritten questions are clear and unambiguous.
</instruction>
</example>
</rules for communicating with other experts>

<important note>
- The expert types listed above are just suggestions; you should also consult completely new kinds of experts based on the task requirements
- When outputting the final list of questions the name of any Expert or Persona must not appear in the text of any question
- Ensure that only the generated questions are present in the output with no extraneous information
</important note>

output format: <questions>
<question>first question</question>
...
<question>last question</question>
</questions>)";

constexpr std::string_view kComplexQuestions = R"(<task>
<name>Creating Complex Questions</name>
<description>
The task is to:
1. Create complex questions or problems.
2. Ensure that the questions require multi-step reasoning, critical thinking, or creative problem-solving.
3. Each question should not be more than one-hundred (100) words.
4. The questions should in various styles and in the formats of various tasks e.g. reading comprehension, mathematical problems or other complex domain-specific tasks etc.
5. Reading comprehension style questions can be divided into: multiple-choice questions (MCQs), literal comprehension questions with short answers, numerical/discrete reasoning, critical comprehension, evaluative comprehension, vocabulary and language use (e.g. fill-in-the-blank), relationship comprehension, sequencing events, argument strengthening/weakening, or assumption, inference, flaws in reasoning type of questions etc.,
6. The question style must test the ability to consider multiple perspectives, engage in hypothetical scenarios and problem-solving.
7. The questions may requiring making unexpected connections, analyzing arguments, identifying logical fallacies, paradoxes, or evaluating evidence.
8. Ensure that the questions are clear, well-structured and unambiguous, despite their complexity.
</description>
<evaluation>
<metric> Human evaluation of the diversity, complexity, difficulty, and level of thinking required to answer each question. </metric>
</evaluation>
</task>)";

constexpr std::string_view kHeadlines = R"(<task>
<name>News Headline Generation</name>
<description>
The task is to:
1. Generate creative headlines in the style of The Onion and HuffPost that can serve as high quality examples for sarcasm classification.
2. Ensure there is a balance of sarcastic and serious headlines.
3. The headlines should not contain the literal word "sarcasm" or "serious".
4. The headlines should be grammatical and well-written.
</description>
<task-examples>
1. "helpful waitress asks recently seated couple if they`ve eaten food before"
2. "must-see tv shows you can't miss this fall"
3. "as per tradition, election results officially certified with two barks of approval from electoral collie"
</task-examples>
<evaluation>
<metric>Human evaluation of the creativity and relevance of generated headlines.</metric>
</evaluation>
</task>)";

constexpr std::string_view kFiqaAbsa = R"(<task>
<name>Data Generation For Aspect Based Sentiment Analysis (ABSA) </name>
<description>
The task is to:
1. Generate diverse example sentences that mention specific aspects related to companies, products, or services.
2. Each example sentence should contain only one clear aspect that could be subject to sentiment analysis.
3. The aspects should be varied and could include company names, stock symbols, product features, or service characteristics.
4. The aspects must always be present as a substring in the generated sentence.
5. The example sentences should be written in a style similar to social media posts, news headlines, or customer reviews.
6. The format of each generated example should be as follows: sentence: {text of sentence} aspect: {the relevant aspect}
7. Ensure a balance of potentially positive, negative, and neutral contexts for the aspects.
8. The sentences should be in English.
</description>
<examples>
1. sentence: #Tesla: Model X Recall Adds To Reliability Issues $TSLA https://t.co/jVXQ4DoXnP aspect: TSLA
2. sentence: $AAPL AAPL: Gundlach Slams iPad mini, Sees Downside to $425. http://stks.co/bDqV aspect: AAPL
3. sentence: $UBNT still having some trouble at the resistance line. Should resolve soon.@cheri1 @strattonite http://stks.co/c0sU4 aspect: UBNT
</examples>
<evaluation>
<metric>Human evaluation of the diversity, relevance, and quality of generated example sentences and their corresponding aspects.</metric>
</evaluation>
</task>)";

constexpr std::string_view kFpb = R"(<task>
<name>Data Generation for Sentiment Analysis Task</name>
<description>
The task is to:
1. Write some financial news that expresses polar sentiments.
2. Consider each piece of financial news from the viewpoint of an investor, i.e., whether the news could have a positive, negative, or neutral influence on a stock price.
3. Sentences whose sentiment is not relevant from an economic or financial perspective are deemed neutral.
4. Ensure a balance of positive, negative, and neutral sentiments across the generated sentences.
5. The length of each piece of financial news must be between 12-18 words.
6. Be creative and write unique financial news.
7. Avoid including explicit sentiment words like "positive," "negative," or "neutral" in the sentences themselves.
8. Generate only the news without adding any additional commentary.
</description>
<examples>
1. Cramo slipped to a pretax loss of EUR 6.7 million from a pretax profit of EUR 58.9 million.
2. In Finland, insurance company Pohjola and the Finnish motorcyclist association have signed an agreement with the aim of improving motorcyclists' traffic safety.
3. The agreement was signed with Biohit Healthcare Ltd, the UK-based subsidiary of Biohit Oyj, a Finnish public company which develops, manufactures, and markets liquid handling products and diagnostic test systems.
</examples>
<evaluation>
<metric>Human evaluation of the diversity, relevance, and quality of generated sentences considering financial context.</metric>
</evaluation>
</task>)";

constexpr std::string_view kWinrate =
    "Please act as an impartial judge and evaluate the quality of the responses provided by two AI assistants to the "
    "user question displayed below. You should choose the assistant that follows the user's instructions and answers "
    "the user's question better. Your evaluation should consider factors such as the helpfulness, relevance, "
    "accuracy, depth, creativity, and level of detail of their responses. Begin your evaluation by comparing the two "
    "responses. Avoid any position biases and ensure that the order in which the responses were presented does not "
    "influence your decision. Do not allow the length of the responses to influence your evaluation. Do not favor "
    "certain names of the assistants. Be as objective as possible. Output your final verdict by strictly following "
    "this format: \"[[A]]\" if assistant A is better, \"[[B]]\" if assistant B is better, and \"[[C]]\" for a tie.";

constexpr std::string_view kAccuracy = R"(You are an impartial and strict judge of answer accuracy.

Given the context and the user instruction below, decide whether the assistant's response is correct and complete.

Return 1 if the response is accurate, 0 if it is inaccurate.
Do not provide any explanation; only return a single digit (1 or 0).

Context: {context}

Instruction: {instruction}

Response: {response}

Judge: Is the response accurate based on the instruction and context?)";

constexpr std::string_view kRelevance = R"(You are an impartial and strict judge of context relevance.

Given the context, the user instruction, and the assistant's response, decide if the instruction-response pair is relevant to the context.

Return 1 if relevant, 0 if irrelevant.

Do not provide any explanation; only return a single digit (1 or 0).

Context: {context}

Instruction: {instruction}

Response: {response}

Judge: Is this instruction-response pair relevant to the context?)";

constexpr std::string_view kCategory = R"(Given this list of categories: {categories},

Classify the following instruction-response pair into exactly one of these categories.

Return only the category name with no additional text.

Instruction: {instruction}

Response: {response}

Category: )";

}  // namespace

std::string document_system_prompt() { return std::string(kDocumentSystem); }

std::string document_meta_prompt() { return std::string(kDocumentMeta); }

std::string document_task(std::string_view domain, std::size_t n_documents) {
  auto s = replace_all(std::string(kDocumentTask), "{domain}", domain);
  return replace_all(std::move(s), "{n}", std::to_string(n_documents));
}

std::string seed_block(const std::vector<std::string>& keywords, const std::vector<std::string>& seed_texts) {
  std::string out;
  if (!seed_texts.empty()) {
    out += "<seed documents>\n" + numbered(seed_texts, "<seed document>\n", "\n</seed document>") +
           "\n</seed documents>";
  }
  if (!keywords.empty()) {
    if (!out.empty()) out += "\n";
    out += "<seed keywords> [" + text::join(keywords, ", ") + "] </seed keywords>";
  }
  return out;
}

std::string template_instruction(std::string_view domain, const std::vector<std::string>& seed_texts) {
  const auto seeds = "\n" + numbered(seed_texts, "<seed document>\n", "\n</seed document>") + "\n";
  auto s = replace_all(std::string(kTemplateInstruction), "{domain}", domain);
  return replace_all(std::move(s), "{seeds}", seeds);
}

std::string template_injected_instruction(const std::vector<std::string>& previous_documents) {
  const auto prev = previous_documents.empty()
                        ? std::string("(none yet)")
                        : "\n" + numbered(previous_documents, "<previous document>\n", "\n</previous document>") + "\n";
  return replace_all(std::string(kTemplateInjected), "{previous}", prev);
}

std::string template_prompt(std::string_view domain, const std::vector<std::string>& seed_texts,
                            const std::vector<std::string>& previous_documents) {
  return template_instruction(domain, seed_texts) + "\n\n" + template_injected_instruction(previous_documents);
}

std::string instruction_system_prompt() { return std::string(kInstructionSystem); }

std::string instruction_meta_prompt(std::string_view task_description) {
  return replace_all(std::string(kInstructionMeta), "{task}", task_description);
}

std::string instruction_task(std::string_view document_text) {
  return "<document>\n" + std::string(document_text) + "\n</document>";
}

std::vector<std::string> task_preset_names() { return {"complex-questions", "headlines", "fiqa-absa", "fpb"}; }

std::string task_preset(std::string_view name) {
  if (name == "complex-questions") return std::string(kComplexQuestions);
  if (name == "headlines") return std::string(kHeadlines);
  if (name == "fiqa-absa") return std::string(kFiqaAbsa);
  if (name == "fpb") return std::string(kFpb);
  throw PreconditionError("unknown task preset '" + std::string(name) + "'");
}

std::string free_form_template(std::string_view instruction) { return std::string(instruction); }

std::string cot_template(std::string_view instruction) {
  return std::string(instruction) + "\nLet's think step by step.";
}

std::string constrained_cot_template(std::string_view instruction, int word_limit) {
  return std::string(instruction) + "\nLet's think step by step and limit the answer length to " +
         std::to_string(word_limit) + " words.";
}

std::string winrate_system_prompt() { return std::string(kWinrate); }

std::string winrate_prompt(std::string_view instruction, std::string_view response_a, std::string_view response_b) {
  return "[User Question]\n" + std::string(instruction) + "\n\n[The Start of Assistant A's Answer]\n" +
         std::string(response_a) + "\n[The End of Assistant A's Answer]\n\n[The Start of Assistant B's Answer]\n" +
         std::string(response_b) + "\n[The End of Assistant B's Answer]";
}

namespace {

std::string fill_judge(std::string_view tmpl, std::string_view context, std::string_view instruction,
                       std::string_view response) {
  auto s = replace_all(std::string(tmpl), "{context}", context);
  s = replace_all(std::move(s), "{instruction}", instruction);
  return replace_all(std::move(s), "{response}", response);
}

}  // namespace

std::string accuracy_prompt(std::string_view context, std::string_view instruction, std::string_view response) {
  return fill_judge(kAccuracy, context, instruction, response);
}

std::string relevance_prompt(std::string_view context, std::string_view instruction, std::string_view response) {
  return fill_judge(kRelevance, context, instruction, response);
}

std::string category_prompt(const std::vector<std::string>& categories, std::string_view instruction,
                            std::string_view response) {
  auto s = replace_all(std::string(kCategory), "{categories}", text::join(categories, ", "));
  s = replace_all(std::move(s), "{instruction}", instruction);
  return replace_all(std::move(s), "{response}", response);
}

std::vector<std::string> default_task_categories() {
  return {"Question Answering",   "Text Categorization", "Sentiment Analysis",  "Information Extraction",
          "Summarization",        "Text Composition",    "Commonsense Reasoning", "Mathematics",
          "Program Execution",    "Textual Entailment",  "Question Generation",   "Explanation",
          "Fill in The Blank",    "Misc."};
}

std::string keyword_generation_prompt(std::string_view domain, std::size_t count,
                                      const std::vector<std::string>& already_have) {
  std::string out = "You are Keyword Generation Expert. Generate " + std::to_string(count) +
                    " random, specific and mutually distinct keywords from the " + std::string(domain) +
                    " domain that could anchor the writing of new documents.";
  if (!already_have.empty()) {
    out += " Do not repeat any of these keywords: [" + text::join(already_have, ", ") + "].";
  }
  out += " Output them in the following format: [keyword 1, keyword 2 ... keyword N]";
  return out;
}

std::string topic_label_prompt(std::string_view document_text) {
  return "You are Topic Labeling Expert. Assign a short topic label (at most five words) to the following "
         "document. Reply with the label only.\n<document>\n" +
         std::string(document_text) + "\n</document>";
}

std::string summarizer_instruction(std::string_view document_text) {
  return "You are Summarizer Expert. Please provide a three-line summary of the following document: <summarize> " +
         std::string(document_text) + " </summarize>.";
}

std::string expert_guidance(std::string_view name) {
  if (name_ends_with(name, "Summarizer Expert")) {
    return "Reply with exactly three lines summarizing the document and nothing else.";
  }
  if (name_ends_with(name, "Content Analyst Expert")) {
    return "Finish your reply with a line reading VERDICT: DISTINCT if the latest document is sufficiently distinct "
           "from all previous ones, or VERDICT: REWRITE if it should be rewritten. Label the latest document's "
           "category as <category>label</category>.";
  }
  if (name_ends_with(name, "Seed Keyword Extraction Expert") || name_ends_with(name, "Seed Keyword Expansion Expert")) {
    return "Output the keywords as <seed keywords> [keyword 1, keyword 2 ... keyword N] </seed keywords>.";
  }
  if (name_ends_with(name, "Evaluation Expert")) {
    return "Finish your reply with a line reading VERDICT: ACCEPT if the questions are sufficiently complex and "
           "diverse, otherwise VERDICT: REJECT.";
  }
  if (name_ends_with(name, "Persona Suggestion Expert")) {
    return "List each persona on its own line starting with \"- \".";
  }
  if (name_ends_with(name, "Question Generation Expert") || name_ends_with(name, "Question Editor Expert")) {
    return "Write each question as <question>text of question</question>.";
  }
  if (name_ends_with(name, "Topic Labeling Expert")) {
    return "Reply with the topic label only.";
  }
  return {};
}

}  // namespace metasynth::prompts
