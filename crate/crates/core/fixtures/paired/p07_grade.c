#include <stdio.h>
int main() {
    int m, f;
    scanf("%d %d", &m, &f);
    if (m + f >= 80) {
        printf("A\n");
    } else {
        if (m + f >= 50) {
            printf("B\n");
        } else {
            printf("F\n");
        }
    }
    return 0;
}
