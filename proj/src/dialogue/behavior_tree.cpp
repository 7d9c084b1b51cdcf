#include "coach/dialogue/behavior_tree.hpp"

namespace coach::dialogue::bt {

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Running: return "running";
    case Status::Success: return "success";
    case Status::Failure: return "failure";
  }
  return "?";
}

Sequence::Sequence(std::string name, std::vector<NodePtr> children)
    : Node(std::move(name)), children_(std::move(children)) {}

Status Sequence::tick() {
  while (current_ < children_.size()) {
    const Status s = children_[current_]->tick();
    if (s == Status::Running) return s;
    if (s == Status::Failure) {
      reset();
      return s;
    }
    ++current_;
  }
  reset();
  return Status::Success;
}

void Sequence::reset() {
  for (auto& c : children_) c->reset();
  current_ = 0;
}

Fallback::Fallback(std::string name, std::vector<NodePtr> children)
    : Node(std::move(name)), children_(std::move(children)) {}

Status Fallback::tick() {
  while (current_ < children_.size()) {
    const Status s = children_[current_]->tick();
    if (s == Status::Running) return s;
    if (s == Status::Success) {
      reset();
      return s;
    }
    ++current_;
  }
  reset();
  return Status::Failure;
}

void Fallback::reset() {
  for (auto& c : children_) c->reset();
  current_ = 0;
}

While::While(std::string name, NodePtr condition, NodePtr body)
    : Node(std::move(name)), condition_(std::move(condition)), body_(std::move(body)) {}

Status While::tick() {
  if (!in_body_) {
    if (condition_->tick() != Status::Success) return Status::Success;
    in_body_ = true;
  }
  const Status s = body_->tick();
  if (s == Status::Running) return s;
  in_body_ = false;
  body_->reset();
  return s == Status::Failure ? Status::Failure : Status::Running;
}

void While::reset() {
  condition_->reset();
  body_->reset();
  in_body_ = false;
}

}  // namespace coach::dialogue::bt
