#pragma once

#include <string>
#include <string_view>

namespace adaproj {

enum class Domain { Source, Target };
enum class Label { Normal, Anomalous, Unknown };
enum class Split { Train, Test };

std::string_view to_string(Domain domain);
std::string_view to_string(Label label);
std::string_view to_string(Split split);

// Parsers throw DataError on unknown names.
Domain parse_domain(std::string_view text);
Label parse_label(std::string_view text);
Split parse_split(std::string_view text);

}  // namespace adaproj
