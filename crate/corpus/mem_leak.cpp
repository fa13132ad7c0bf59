// FLAGS: --memory-leak-check
struct Node {
  int value;
  Node *next;
};

int main() {
  Node *head = new Node();
  head->value = 1;
  head->next = nullptr;
  return 0;
}
// VERDICT: FAILED
// PROPERTY: memory leak
