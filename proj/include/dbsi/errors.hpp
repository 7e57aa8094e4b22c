#pragma once

#include <stdexcept>
#include <string>

namespace dbsi {

// Scenario/config validation failure. The CLI maps this to exit code 1.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Numerical divergence during a run (e.g. a nonpositive norm estimate).
// Carries the frame and node where the run aborted; CLI exit code 2.
class divergence_error : public std::runtime_error {
 public:
  divergence_error(const std::string& what, long frame, int node)
      : std::runtime_error("frame " + std::to_string(frame) + ", node " +
                           std::to_string(node) + ": " + what),
        frame_(frame),
        node_(node) {}

  long frame() const { return frame_; }
  int node() const { return node_; }

 private:
  long frame_;
  int node_;
};

}  // namespace dbsi
