"""Identity Cleanup: a Cleanup social dilemma with hidden identities and dynamic teams."""
