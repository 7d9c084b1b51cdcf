#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace coach::dialogue::bt {

enum class Status { Running, Success, Failure };

std::string_view to_string(Status s);

class Node {
 public:
  explicit Node(std::string name) : name_(std::move(name)) {}
  virtual ~Node() = default;

  virtual Status tick() = 0;
  /// Forget in-progress state so the next tick starts afresh.
  virtual void reset() {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

using NodePtr = std::unique_ptr<Node>;

/// Leaf wrapping a callable. `on_reset` runs whenever the node is reset.
class Action : public Node {
 public:
  Action(std::string name, std::function<Status()> fn, std::function<void()> on_reset = {})
      : Node(std::move(name)), fn_(std::move(fn)), on_reset_(std::move(on_reset)) {}

  Status tick() override { return fn_(); }
  void reset() override {
    if (on_reset_) on_reset_();
  }

 private:
  std::function<Status()> fn_;
  std::function<void()> on_reset_;
};

/// Leaf returning Success when the predicate holds, Failure otherwise.
class Condition : public Node {
 public:
  Condition(std::string name, std::function<bool()> pred) : Node(std::move(name)), pred_(std::move(pred)) {}
  Status tick() override { return pred_() ? Status::Success : Status::Failure; }

 private:
  std::function<bool()> pred_;
};

/// Runs children in order, resuming at the running child on the next tick.
class Sequence : public Node {
 public:
  Sequence(std::string name, std::vector<NodePtr> children);
  Status tick() override;
  void reset() override;
  std::size_t current() const { return current_; }

 private:
  std::vector<NodePtr> children_;
  std::size_t current_ = 0;
};

/// Tries children in order until one does not fail.
class Fallback : public Node {
 public:
  Fallback(std::string name, std::vector<NodePtr> children);
  Status tick() override;
  void reset() override;

 private:
  std::vector<NodePtr> children_;
  std::size_t current_ = 0;
};

/// Repeats `body` while `condition` succeeds; Success once it fails.
/// Each completed body iteration yields Running so one tick does one pass.
class While : public Node {
 public:
  While(std::string name, NodePtr condition, NodePtr body);
  Status tick() override;
  void reset() override;

 private:
  NodePtr condition_;
  NodePtr body_;
  bool in_body_ = false;
};

}  // namespace coach::dialogue::bt
