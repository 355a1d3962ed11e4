#include "pcmea/error.hpp"

namespace pcmea {

ParseError::ParseError(const std::string& where, std::size_t line, const std::string& what)
    : Error(where + ":" + std::to_string(line) + ": " + what), line_(line) {}

}  // namespace pcmea
