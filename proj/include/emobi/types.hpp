#pragma once

#include <stdexcept>
#include <string>

namespace emobi {

// The two rhetorical devices the pipeline labels.
enum class Device { hyperbole, metaphor };

inline Device other_device(Device d) {
    return d == Device::hyperbole ? Device::metaphor : Device::hyperbole;
}

std::string to_string(Device d);
Device device_from_string(const std::string& s);

// A response carried no parseable answer line. Callers decide whether to
// retry or abort; there is no default label.
class ParseError : public std::runtime_error {
  public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input data; the message names the row/value where possible.
class DataError : public std::runtime_error {
  public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Completion provider failure. Transient failures are retried per policy.
class ProviderError : public std::runtime_error {
  public:
    ProviderError(const std::string& what, bool transient)
        : std::runtime_error(what), transient_(transient) {}
    bool transient() const { return transient_; }

  private:
    bool transient_;
};

}  // namespace emobi
