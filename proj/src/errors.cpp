#include "roleplay/errors.hpp"

#include <fmt/format.h>

namespace roleplay {

ParseError::ParseError(std::size_t line, std::string field, const std::string& what)
    : Error(line ? fmt::format("line {}: field '{}': {}", line, field, what)
                 : fmt::format("field '{}': {}", field, what)),
      line_(line),
      field_(std::move(field)) {}

RenderError::RenderError(std::string placeholder)
    : Error(fmt::format("{} unbound", placeholder)), placeholder_(std::move(placeholder)) {}

}  // namespace roleplay
