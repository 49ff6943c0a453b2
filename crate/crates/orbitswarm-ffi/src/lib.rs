//! Placeholder; real bindings land after the core API settles.
