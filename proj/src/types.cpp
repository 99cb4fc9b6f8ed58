#include "adaproj/types.hpp"

#include "adaproj/error.hpp"

namespace adaproj {

std::string_view to_string(Domain domain) { return domain == Domain::Source ? "source" : "target"; }

std::string_view to_string(Label label) {
  switch (label) {
    case Label::Normal: return "normal";
    case Label::Anomalous: return "anomalous";
    case Label::Unknown: return "unknown";
  }
  return "unknown";
}

std::string_view to_string(Split split) { return split == Split::Train ? "train" : "test"; }

Domain parse_domain(std::string_view text) {
  if (text == "source") return Domain::Source;
  if (text == "target") return Domain::Target;
  throw Error(ErrorKind::DataError, "unknown domain '" + std::string(text) + "'");
}

Label parse_label(std::string_view text) {
  if (text == "normal") return Label::Normal;
  if (text == "anomalous") return Label::Anomalous;
  if (text == "unknown") return Label::Unknown;
  throw Error(ErrorKind::DataError, "unknown label '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "test") return Split::Test;
  throw Error(ErrorKind::DataError, "unknown split '" + std::string(text) + "'");
}

}  // namespace adaproj
