#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace metasynth::prompts {

// Document synthesis (meta-prompting).
std::string document_system_prompt();
std::string document_meta_prompt();
std::string document_task(std::string_view domain, std::size_t n_documents);
std::string seed_block(const std::vector<std::string>& keywords, const std::vector<std::string>& seed_texts);

// Template-prompting baseline.
std::string template_instruction(std::string_view domain, const std::vector<std::string>& seed_texts);
std::string template_injected_instruction(const std::vector<std::string>& previous_documents);
std::string template_prompt(std::string_view domain, const std::vector<std::string>& seed_texts,
                            const std::vector<std::string>& previous_documents);

// Instruction synthesis (meta-prompting).
std::string instruction_system_prompt();
std::string instruction_meta_prompt(std::string_view task_description);
std::string instruction_task(std::string_view document_text);

/// Named task-description presets: "complex-questions", "headlines",
/// "fiqa-absa", "fpb".
std::vector<std::string> task_preset_names();
std::string task_preset(std::string_view name);

// Response synthesis.
std::string free_form_template(std::string_view instruction);
std::string cot_template(std::string_view instruction);
std::string constrained_cot_template(std::string_view instruction, int word_limit);

// Judges.
std::string winrate_system_prompt();
std::string winrate_prompt(std::string_view instruction, std::string_view response_a, std::string_view response_b);
std::string accuracy_prompt(std::string_view context, std::string_view instruction, std::string_view response);
std::string relevance_prompt(std::string_view context, std::string_view instruction, std::string_view response);
std::string category_prompt(const std::vector<std::string>& categories, std::string_view instruction,
                            std::string_view response);
std::vector<std::string> default_task_categories();

// Single-purpose agents.
std::string keyword_generation_prompt(std::string_view domain, std::size_t count,
                                      const std::vector<std::string>& already_have);
std::string topic_label_prompt(std::string_view document_text);
std::string summarizer_instruction(std::string_view document_text);

/// Output-format guidance appended to an expert's role framing, chosen by
/// the expert's name alone. Empty for experts without a required format.
std::string expert_guidance(std::string_view expert_name);

}  // namespace metasynth::prompts
